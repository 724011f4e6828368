#pragma once

// Deterministic deployment bundles: an uncompressed ustar archive holding
// manifest.json and model.bin with fixed metadata (mode 0644, uid/gid 0,
// mtime 0, sorted paths).

#include "mmgr/blob_store.hpp"
#include "mmgr/registry.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mmgr {

inline constexpr int kBundleFormatVersion = 1;
inline constexpr std::string_view kModelFormat = "MFLM/1";
inline constexpr std::string_view kManifestPath = "manifest.json";
inline constexpr std::string_view kModelPath = "model.bin";
inline constexpr std::string_view kAgentVersion = "1.0.0";
inline constexpr std::string_view kRuntimeRequirement = ">=1.0.0,<2.0.0";

struct SemVer {
  int major = 0, minor = 0, patch = 0;
  auto operator<=>(const SemVer&) const = default;
};

SemVer parse_semver(std::string_view text);

/// ">=a.b.c,<d.0.0"
struct VersionRange {
  SemVer lower;
  SemVer upper;
  bool contains(const SemVer& v) const { return lower <= v && v < upper; }
};

VersionRange parse_version_range(std::string_view text);

struct BundleManifest {
  int format_version = kBundleFormatVersion;
  std::string model_id;
  BlobRef model_blob;
  std::string model_format{kModelFormat};
  InputSchema input_schema;
  std::string runtime_requirement{kRuntimeRequirement};
  nlohmann::json metrics = nlohmann::json::object();
  std::map<std::string, std::string> checksums;  // path -> sha256
  std::string created_at;
};

/// Canonical manifest bytes: sorted keys, compact, with "manifest_digest"
/// set to the SHA-256 of the same document without that key.
std::string encode_manifest(const BundleManifest& manifest);

/// Builds the archive; `manifest.checksums` is (re)computed from the files.
std::string build_bundle_archive(BundleManifest manifest, std::string_view model_bytes);

/// Checks every archive byte, the manifest digest and every file checksum.
/// Corruption errors name the offending path in detail["path"].
BundleManifest verify_bundle(std::string_view archive);

/// Extracts one file after verification.
std::string bundle_file(std::string_view archive, std::string_view path);

/// Minimal ustar codec used by the bundle format.
std::string write_tar(const std::vector<std::pair<std::string, std::string>>& files);
std::vector<std::pair<std::string, std::string>> read_tar(std::string_view archive);

}  // namespace mmgr

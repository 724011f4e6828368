#include "mmgr/bundle.hpp"

#include "mmgr/error.hpp"
#include "mmgr/sha256.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <set>

namespace mmgr {

namespace {

constexpr std::size_t kBlock = 512;

[[noreturn]] void corrupt(const std::string& message, std::string_view path = {}, std::string_view reason = {}) {
  Json detail = Json::object();
  if (!path.empty()) detail["path"] = path;
  if (!reason.empty()) detail["reason"] = reason;
  fail(ErrorCode::corruption, "bundle: " + message, std::move(detail));
}

void put_octal(char* field, std::size_t width, std::uint64_t value) {
  // width - 1 zero-padded octal digits and a NUL
  std::snprintf(field, width, "%0*llo", static_cast<int>(width - 1), static_cast<unsigned long long>(value));
}

std::uint64_t header_checksum(const char* header) {
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < kBlock; ++i) {
    const bool in_field = i >= 148 && i < 156;
    sum += in_field ? static_cast<unsigned char>(' ') : static_cast<unsigned char>(header[i]);
  }
  return sum;
}

std::uint64_t read_octal(std::string_view field, std::string_view path) {
  const auto end = field.find('\0');
  field = field.substr(0, end);
  while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
  std::uint64_t v = 0;
  if (field.empty()) corrupt("empty numeric header field", path);
  auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v, 8);
  if (ec != std::errc() || p != field.data() + field.size()) corrupt("malformed numeric header field", path);
  return v;
}

int parse_component(std::string_view s, std::string_view whole) {
  int v = 0;
  if (s.empty() || s.size() > 9 || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    fail(ErrorCode::validation, "malformed version: " + std::string(whole), Json{{"version", whole}});
  }
  std::from_chars(s.data(), s.data() + s.size(), v);
  return v;
}

std::string sha_of_file(const std::vector<std::pair<std::string, std::string>>& files, std::string_view path) {
  for (const auto& [p, data] : files) {
    if (p == path) return sha256_hex(data);
  }
  return {};
}

}  // namespace

SemVer parse_semver(std::string_view text) {
  const auto d1 = text.find('.');
  const auto d2 = d1 == std::string_view::npos ? d1 : text.find('.', d1 + 1);
  if (d2 == std::string_view::npos) {
    fail(ErrorCode::validation, "malformed version: " + std::string(text), Json{{"version", text}});
  }
  return {parse_component(text.substr(0, d1), text), parse_component(text.substr(d1 + 1, d2 - d1 - 1), text),
          parse_component(text.substr(d2 + 1), text)};
}

VersionRange parse_version_range(std::string_view text) {
  const auto comma = text.find(',');
  if (!text.starts_with(">=") || comma == std::string_view::npos || text.substr(comma + 1, 1) != "<") {
    fail(ErrorCode::validation, "version range must look like >=a.b.c,<d.0.0: " + std::string(text),
         Json{{"range", text}});
  }
  VersionRange r{parse_semver(text.substr(2, comma - 2)), parse_semver(text.substr(comma + 2))};
  if (r.upper.minor != 0 || r.upper.patch != 0 || !(r.lower < r.upper)) {
    fail(ErrorCode::validation, "version range must look like >=a.b.c,<d.0.0: " + std::string(text),
         Json{{"range", text}});
  }
  return r;
}

std::string write_tar(const std::vector<std::pair<std::string, std::string>>& files) {
  std::string out;
  for (const auto& [path, data] : files) {
    if (path.empty() || path.size() >= 100) fail(ErrorCode::validation, "tar path must be 1..99 bytes: " + path);
    char h[kBlock] = {};
    std::copy(path.begin(), path.end(), h);
    put_octal(h + 100, 8, 0644);
    put_octal(h + 108, 8, 0);
    put_octal(h + 116, 8, 0);
    put_octal(h + 124, 12, data.size());
    put_octal(h + 136, 12, 0);
    h[156] = '0';
    std::copy_n("ustar", 6, h + 257);
    h[263] = '0';
    h[264] = '0';
    std::snprintf(h + 148, 8, "%06llo", static_cast<unsigned long long>(header_checksum(h)));
    h[155] = ' ';
    out.append(h, kBlock);
    out.append(data);
    out.append((kBlock - data.size() % kBlock) % kBlock, '\0');
  }
  out.append(2 * kBlock, '\0');
  return out;
}

std::vector<std::pair<std::string, std::string>> read_tar(std::string_view archive) {
  std::vector<std::pair<std::string, std::string>> files;
  std::size_t pos = 0;
  while (true) {
    if (pos + kBlock > archive.size()) corrupt("archive truncated (missing end-of-archive marker)");
    const std::string_view h = archive.substr(pos, kBlock);
    if (std::all_of(h.begin(), h.end(), [](char c) { return c == '\0'; })) break;
    std::string path(h.substr(0, std::min<std::size_t>(100, h.find('\0'))));
    if (path.empty()) corrupt("entry with empty path");
    if (read_octal(h.substr(148, 8), path) != header_checksum(h.data())) corrupt("tar header checksum mismatch", path);
    if (h[156] != '0' && h[156] != '\0') corrupt("unsupported tar entry type", path);
    const std::uint64_t size = read_octal(h.substr(124, 12), path);
    pos += kBlock;
    if (size > archive.size() - pos) corrupt("entry data truncated", path);
    files.emplace_back(std::move(path), std::string(archive.substr(pos, size)));
    pos += (size + kBlock - 1) / kBlock * kBlock;
  }
  return files;
}

std::string encode_manifest(const BundleManifest& m) {
  nlohmann::json j;
  j["format_version"] = m.format_version;
  j["model_id"] = m.model_id;
  j["model_blob"] = {{"hash", m.model_blob.hash}, {"size", m.model_blob.size}};
  j["model_format"] = m.model_format;
  j["input_schema"] = {{"features", m.input_schema.features}, {"target", m.input_schema.target}};
  j["runtime_requirement"] = m.runtime_requirement;
  j["metrics"] = m.metrics;
  j["checksums"] = m.checksums;
  j["created_at"] = m.created_at;
  j["manifest_digest"] = sha256_hex(j.dump());
  return j.dump();
}

std::string build_bundle_archive(BundleManifest manifest, std::string_view model_bytes) {
  manifest.model_blob = blob_ref_of(model_bytes);
  manifest.checksums = {{std::string(kModelPath), sha256_hex(model_bytes)}};
  return write_tar({{std::string(kManifestPath), encode_manifest(manifest)}, {std::string(kModelPath), std::string(model_bytes)}});
}

BundleManifest verify_bundle(std::string_view archive) {
  const auto files = read_tar(archive);
  std::set<std::string> paths;
  for (const auto& [p, _] : files) {
    if (!paths.insert(p).second) corrupt("duplicate entry " + p, p);
  }
  const std::string* manifest_text = nullptr;
  for (const auto& [p, data] : files) {
    if (p == kManifestPath) manifest_text = &data;
  }
  if (!manifest_text) corrupt("manifest.json is missing", kManifestPath, "incomplete_bundle");

  auto j = nlohmann::json::parse(*manifest_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) corrupt("manifest is not a JSON object", kManifestPath);
  if (!j.contains("format_version") || !j["format_version"].is_number_integer()) {
    corrupt("manifest lacks an integer format_version", kManifestPath);
  }
  if (j["format_version"].get<int>() != kBundleFormatVersion) {
    fail(ErrorCode::unsupported, "unsupported bundle format_version " + j["format_version"].dump(),
         Json{{"format_version", j["format_version"].get<int>()}});
  }
  if (j.dump() != *manifest_text) corrupt("manifest bytes are not canonical", kManifestPath);
  if (!j.contains("manifest_digest") || !j["manifest_digest"].is_string()) {
    corrupt("manifest lacks manifest_digest", kManifestPath);
  }
  const std::string digest = j["manifest_digest"].get<std::string>();
  j.erase("manifest_digest");
  if (sha256_hex(j.dump()) != digest) corrupt("manifest digest mismatch", kManifestPath);

  BundleManifest m;
  try {
    m.format_version = j.at("format_version").get<int>();
    m.model_id = j.at("model_id").get<std::string>();
    m.model_blob = {j.at("model_blob").at("hash").get<std::string>(), j.at("model_blob").at("size").get<std::uint64_t>()};
    m.model_format = j.at("model_format").get<std::string>();
    m.input_schema.features = j.at("input_schema").at("features").get<std::vector<std::string>>();
    m.input_schema.target = j.at("input_schema").at("target").get<std::string>();
    m.runtime_requirement = j.at("runtime_requirement").get<std::string>();
    m.metrics = j.at("metrics");
    m.checksums = j.at("checksums").get<std::map<std::string, std::string>>();
    m.created_at = j.at("created_at").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    corrupt(std::string("malformed manifest field: ") + e.what(), kManifestPath);
  }

  for (const auto& [path, expected] : m.checksums) {
    if (!paths.count(path)) corrupt("listed file is missing: " + path, path, "incomplete_bundle");
    if (sha_of_file(files, path) != expected) corrupt("checksum mismatch for " + path, path);
  }
  for (const auto& p : paths) {
    if (p != kManifestPath && !m.checksums.count(p)) corrupt("unlisted file " + p, p);
  }
  if (!m.checksums.count(std::string(kModelPath))) corrupt("model.bin is missing", kModelPath, "incomplete_bundle");
  if (m.checksums.at(std::string(kModelPath)) != m.model_blob.hash) corrupt("model_blob disagrees with model.bin", kModelPath);
  parse_version_range(m.runtime_requirement);
  if (m.model_format != kModelFormat) {
    fail(ErrorCode::unsupported, "unsupported model format " + m.model_format, Json{{"model_format", m.model_format}});
  }
  if (write_tar(files) != archive) corrupt("archive bytes are not in canonical form");
  return m;
}

std::string bundle_file(std::string_view archive, std::string_view path) {
  verify_bundle(archive);
  for (auto& [p, data] : read_tar(archive)) {
    if (p == path) return std::move(data);
  }
  not_found("bundle entry", path);
}

}  // namespace mmgr

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace mmgr {

/// Content address of an immutable blob.
struct BlobRef {
  std::string hash;  // SHA-256, 64 lowercase hex chars
  std::uint64_t size = 0;

  friend bool operator==(const BlobRef&, const BlobRef&) = default;
};

BlobRef blob_ref_of(std::string_view content);

/// Filesystem blob store with a two-level fan-out layout
/// (`ab/cd/abcd...`). Writes go to a unique temp file and are renamed into
/// place, so racing puts of identical content converge on one file.
class BlobStore {
 public:
  explicit BlobStore(std::filesystem::path root);

  BlobRef put(std::string_view content);

  /// Throws not_found for unknown hashes and corruption when the stored
  /// bytes no longer hash to `hash`.
  std::string get(std::string_view hash) const;

  bool contains(std::string_view hash) const;
  std::filesystem::path path_for(std::string_view hash) const;
  std::size_t count() const;

 private:
  std::filesystem::path root_;
};

}  // namespace mmgr

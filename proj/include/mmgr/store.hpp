#pragma once

#include "mmgr/blob_store.hpp"
#include "mmgr/clock.hpp"
#include "mmgr/database.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace mmgr {

/// Shared persistence context: the relational metadata store, the blob
/// store, and the timestamp source. Modules hold a reference to one Store.
class Store {
 public:
  /// Opens (creating if needed) `<data_dir>/registry.db` and `<data_dir>/blobs`.
  explicit Store(const std::filesystem::path& data_dir, Clock clock = system_clock());

  Database& db() { return db_; }
  BlobStore& blobs() { return blobs_; }
  const BlobStore& blobs() const { return blobs_; }
  std::string now() const { return clock_(); }
  const std::filesystem::path& data_dir() const { return data_dir_; }

  /// Allocates the next id for `prefix`, e.g. "snap" -> "snap-000007".
  /// Must be called inside a transaction.
  std::string next_id(std::string_view prefix);

  /// Every addressable entity is registered here so lineage can check
  /// endpoint existence without knowing entity types.
  void register_artifact(std::string_view id, std::string_view kind);
  void unregister_artifact(std::string_view id);
  bool artifact_exists(std::string_view id);
  std::string artifact_kind(std::string_view id);

 private:
  std::filesystem::path data_dir_;
  Database db_;
  BlobStore blobs_;
  Clock clock_;
};

}  // namespace mmgr

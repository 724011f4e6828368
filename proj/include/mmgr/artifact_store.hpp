#pragma once

#include "mmgr/blob_store.hpp"
#include "mmgr/store.hpp"
#include "mmgr/table.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mmgr {

struct Dataset {
  std::string id;
  std::string name;
  std::string description;
  std::string created_at;
  std::vector<std::string> snapshots;  // creation order
};

/// Immutable, content-addressed version of a tabular dataset.
struct Snapshot {
  std::string id;
  std::string dataset_id;
  BlobRef blob;
  std::vector<ColumnSchema> schema;
  std::uint64_t row_count = 0;
  std::string created_at;
  std::optional<std::string> parent;
};

/// Blob storage plus dataset/snapshot bookkeeping.
class ArtifactStore {
 public:
  explicit ArtifactStore(Store& store) : store_(store) {}

  BlobRef put_blob(std::string_view content);
  std::string get_blob(std::string_view hash);

  Dataset create_dataset(std::string_view name, std::string_view description);
  Dataset get_dataset(std::string_view id);
  std::vector<Dataset> list_datasets();
  /// Removes a dataset and its snapshot records. Refused (state error) while
  /// any model was trained on one of its snapshots or another dataset's
  /// snapshot derives from one. Blobs stay; they are content-addressed.
  void delete_dataset(std::string_view id);

  Snapshot ingest_snapshot(std::string_view dataset_id, std::string_view csv,
                           const std::optional<std::string>& parent = std::nullopt);
  Snapshot ingest_table(std::string_view dataset_id, const Table& table,
                        const std::optional<std::string>& parent = std::nullopt);
  Snapshot get_snapshot(std::string_view id);
  std::optional<Snapshot> latest_snapshot(std::string_view dataset_id);
  Table materialize(std::string_view snapshot_id);

  /// Digest over every dataset and snapshot record; equal before and after
  /// any read-only workload.
  std::string fingerprint();

 private:
  Store& store_;
};

}  // namespace mmgr

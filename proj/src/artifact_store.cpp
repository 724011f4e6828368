#include "mmgr/artifact_store.hpp"

#include "mmgr/error.hpp"
#include "mmgr/sha256.hpp"

namespace mmgr {

namespace {

std::string schema_to_json(const std::vector<ColumnSchema>& schema) {
  Json arr = Json::array();
  for (const auto& c : schema) arr.push_back(Json{{"name", c.name}, {"type", to_string(c.type)}});
  return arr.dump();
}

std::vector<ColumnSchema> schema_from_text(const std::string& text) {
  std::vector<ColumnSchema> out;
  for (const auto& c : Json::parse(text)) {
    out.push_back({c.at("name").get<std::string>(),
                   c.at("type").get<std::string>() == "float" ? ColumnType::Float : ColumnType::String});
  }
  return out;
}

constexpr const char* kSnapshotColumns =
    "id, dataset_id, blob_hash, blob_size, schema_json, row_count, created_at, parent";

Snapshot read_snapshot(const Statement& st) {
  Snapshot s;
  s.id = st.text(0);
  s.dataset_id = st.text(1);
  s.blob = {st.text(2), static_cast<std::uint64_t>(st.integer(3))};
  s.schema = schema_from_text(st.text(4));
  s.row_count = static_cast<std::uint64_t>(st.integer(5));
  s.created_at = st.text(6);
  s.parent = st.optional_text(7);
  return s;
}

}  // namespace

BlobRef ArtifactStore::put_blob(std::string_view content) { return store_.blobs().put(content); }

std::string ArtifactStore::get_blob(std::string_view hash) { return store_.blobs().get(hash); }

Dataset ArtifactStore::create_dataset(std::string_view name, std::string_view description) {
  if (name.empty()) fail(ErrorCode::validation, "dataset name must not be empty");
  auto& db = store_.db();
  Database::Transaction tx(db);
  {
    auto st = db.query("SELECT id FROM datasets WHERE name = ?", name);
    if (st.step()) {
      fail(ErrorCode::state, "dataset name already exists: " + std::string(name),
           Json{{"reason", "already_exists"}, {"id", st.text(0)}});
    }
  }
  Dataset d{store_.next_id("ds"), std::string(name), std::string(description), store_.now(), {}};
  db.execute("INSERT INTO datasets(id, name, description, created_at) VALUES(?, ?, ?, ?)", d.id, d.name,
             d.description, d.created_at);
  store_.register_artifact(d.id, "dataset");
  tx.commit();
  return d;
}

Dataset ArtifactStore::get_dataset(std::string_view id) {
  auto& db = store_.db();
  auto lk = db.lock();
  Dataset d;
  {
    auto st = db.query("SELECT id, name, description, created_at FROM datasets WHERE id = ?", id);
    if (!st.step()) not_found("dataset", id);
    d = {st.text(0), st.text(1), st.text(2), st.text(3), {}};
  }
  auto st = db.query("SELECT id FROM snapshots WHERE dataset_id = ? ORDER BY seq", id);
  while (st.step()) d.snapshots.push_back(st.text(0));
  return d;
}

std::vector<Dataset> ArtifactStore::list_datasets() {
  auto& db = store_.db();
  auto lk = db.lock();
  std::vector<std::string> ids;
  {
    auto st = db.query("SELECT id FROM datasets ORDER BY id");
    while (st.step()) ids.push_back(st.text(0));
  }
  std::vector<Dataset> out;
  for (const auto& id : ids) out.push_back(get_dataset(id));
  return out;
}

void ArtifactStore::delete_dataset(std::string_view id) {
  auto& db = store_.db();
  Database::Transaction tx(db);
  Dataset d = get_dataset(id);
  for (const auto& snap : d.snapshots) {
    auto used = db.query("SELECT id FROM runs WHERE input_snapshot = ? LIMIT 1", snap);
    if (used.step()) {
      fail(ErrorCode::state, "snapshot " + snap + " is the input of run " + used.text(0),
           Json{{"snapshot", snap}, {"run", used.text(0)}});
    }
    auto child = db.query("SELECT id FROM snapshots WHERE parent = ? AND dataset_id != ? LIMIT 1", snap, id);
    if (child.step()) {
      fail(ErrorCode::state, "snapshot " + child.text(0) + " derives from " + snap,
           Json{{"snapshot", snap}, {"child", child.text(0)}});
    }
  }
  for (const auto& snap : d.snapshots) {
    db.execute("DELETE FROM links WHERE from_id = ? OR to_id = ?", snap, snap);
    store_.unregister_artifact(snap);
  }
  db.execute("DELETE FROM links WHERE from_id = ? OR to_id = ?", id, id);
  db.execute("DELETE FROM snapshots WHERE dataset_id = ?", id);
  db.execute("DELETE FROM datasets WHERE id = ?", id);
  store_.unregister_artifact(id);
  tx.commit();
}

Snapshot ArtifactStore::ingest_snapshot(std::string_view dataset_id, std::string_view csv,
                                        const std::optional<std::string>& parent) {
  return ingest_table(dataset_id, parse_csv(csv), parent);
}

Snapshot ArtifactStore::ingest_table(std::string_view dataset_id, const Table& table,
                                     const std::optional<std::string>& parent) {
  auto& db = store_.db();
  Database::Transaction tx(db);
  {
    auto st = db.query("SELECT 1 FROM datasets WHERE id = ?", dataset_id);
    if (!st.step()) not_found("dataset", dataset_id);
  }
  if (parent) {
    auto st = db.query("SELECT 1 FROM snapshots WHERE id = ?", *parent);
    if (!st.step()) not_found("snapshot", *parent);
  }
  const std::string payload = encode_canonical(table);
  Snapshot s;
  s.blob = store_.blobs().put(payload);
  s.id = store_.next_id("snap");
  s.dataset_id = std::string(dataset_id);
  s.schema = table.schema();
  s.row_count = table.row_count;
  s.created_at = store_.now();
  s.parent = parent;
  db.execute("INSERT INTO snapshots(id, dataset_id, blob_hash, blob_size, schema_json, row_count, created_at, "
             "parent) VALUES(?, ?, ?, ?, ?, ?, ?, ?)",
             s.id, s.dataset_id, s.blob.hash, s.blob.size, schema_to_json(s.schema), s.row_count, s.created_at,
             s.parent);
  store_.register_artifact(s.id, "snapshot");
  tx.commit();
  return s;
}

Snapshot ArtifactStore::get_snapshot(std::string_view id) {
  auto& db = store_.db();
  auto lk = db.lock();
  auto st = db.query(std::string("SELECT ") + kSnapshotColumns + " FROM snapshots WHERE id = ?", id);
  if (!st.step()) not_found("snapshot", id);
  return read_snapshot(st);
}

std::optional<Snapshot> ArtifactStore::latest_snapshot(std::string_view dataset_id) {
  auto& db = store_.db();
  auto lk = db.lock();
  auto st = db.query(std::string("SELECT ") + kSnapshotColumns +
                         " FROM snapshots WHERE dataset_id = ? ORDER BY seq DESC LIMIT 1",
                     dataset_id);
  if (!st.step()) return std::nullopt;
  return read_snapshot(st);
}

Table ArtifactStore::materialize(std::string_view snapshot_id) {
  const Snapshot s = get_snapshot(snapshot_id);
  Table t = decode_canonical(store_.blobs().get(s.blob.hash));
  if (t.row_count != s.row_count || t.schema() != s.schema) {
    fail(ErrorCode::corruption, "snapshot payload disagrees with its record: " + s.id);
  }
  return t;
}

std::string ArtifactStore::fingerprint() {
  auto& db = store_.db();
  auto lk = db.lock();
  std::string acc;
  {
    auto st = db.query("SELECT id, name, description, created_at FROM datasets ORDER BY id");
    while (st.step()) {
      for (int i = 0; i < 4; ++i) acc += st.text(i) + '\x1f';
      acc += '\n';
    }
  }
  auto st = db.query(std::string("SELECT ") + kSnapshotColumns + " FROM snapshots ORDER BY seq");
  while (st.step()) {
    for (int i = 0; i < 8; ++i) acc += st.text(i) + '\x1f';
    acc += '\n';
  }
  return sha256_hex(acc);
}

}  // namespace mmgr

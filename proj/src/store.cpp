#include "mmgr/store.hpp"

#include "mmgr/error.hpp"

#include <cstdio>
#include <ctime>
#include <memory>
#include <mutex>

namespace mmgr {

std::string format_utc(std::chrono::system_clock::time_point tp) {
  using namespace std::chrono;
  const auto ms = duration_cast<milliseconds>(tp.time_since_epoch()).count();
  const std::time_t secs = static_cast<std::time_t>(ms / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms % 1000));
  return buf;
}

Clock system_clock() {
  return [] { return format_utc(std::chrono::system_clock::now()); };
}

Clock stepping_clock(std::chrono::system_clock::time_point start) {
  struct State {
    std::mutex m;
    std::chrono::system_clock::time_point t;
  };
  auto st = std::make_shared<State>();
  st->t = start;
  return [st] {
    std::lock_guard lk(st->m);
    st->t += std::chrono::milliseconds(1);
    return format_utc(st->t);
  };
}

namespace {

constexpr const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS counters (prefix TEXT PRIMARY KEY, next INTEGER NOT NULL);
CREATE TABLE IF NOT EXISTS artifacts (id TEXT PRIMARY KEY, kind TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS datasets (
  id TEXT PRIMARY KEY, name TEXT NOT NULL UNIQUE, description TEXT NOT NULL, created_at TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS snapshots (
  seq INTEGER PRIMARY KEY AUTOINCREMENT, id TEXT NOT NULL UNIQUE, dataset_id TEXT NOT NULL,
  blob_hash TEXT NOT NULL, blob_size INTEGER NOT NULL, schema_json TEXT NOT NULL,
  row_count INTEGER NOT NULL, created_at TEXT NOT NULL, parent TEXT);
CREATE INDEX IF NOT EXISTS snapshots_by_dataset ON snapshots(dataset_id, seq);
CREATE TABLE IF NOT EXISTS links (
  from_id TEXT NOT NULL, to_id TEXT NOT NULL, kind TEXT NOT NULL, created_at TEXT NOT NULL,
  annotation TEXT, PRIMARY KEY (from_id, to_id, kind));
CREATE INDEX IF NOT EXISTS links_by_kind ON links(kind);
CREATE TABLE IF NOT EXISTS runs (
  id TEXT PRIMARY KEY, algorithm TEXT NOT NULL, hyperparameters TEXT NOT NULL,
  framework_name TEXT NOT NULL, framework_version TEXT NOT NULL, framework_extra TEXT NOT NULL,
  input_snapshot TEXT NOT NULL, train_fraction REAL NOT NULL, seed INTEGER NOT NULL,
  started_at TEXT NOT NULL, finished_at TEXT NOT NULL, produced_model TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS models (
  id TEXT PRIMARY KEY, name TEXT NOT NULL, version INTEGER NOT NULL, artifact_hash TEXT NOT NULL,
  artifact_size INTEGER NOT NULL, features_json TEXT NOT NULL, target TEXT NOT NULL,
  created_by_run TEXT NOT NULL, status TEXT NOT NULL, predecessor TEXT, created_at TEXT NOT NULL,
  UNIQUE (name, version));
CREATE TABLE IF NOT EXISTS evaluations (
  id TEXT PRIMARY KEY, model_id TEXT NOT NULL, snapshot_id TEXT NOT NULL, rmse REAL NOT NULL,
  mae REAL NOT NULL, r2 REAL NOT NULL, n INTEGER NOT NULL, evaluated_at TEXT NOT NULL,
  UNIQUE (model_id, snapshot_id));
CREATE TABLE IF NOT EXISTS gates (
  seq INTEGER PRIMARY KEY AUTOINCREMENT, id TEXT NOT NULL UNIQUE, model_id TEXT NOT NULL,
  overall INTEGER NOT NULL, verdict_json TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS bundles (
  id TEXT PRIMARY KEY, model_id TEXT NOT NULL, blob_hash TEXT NOT NULL, blob_size INTEGER NOT NULL,
  UNIQUE (model_id, blob_hash));
CREATE TABLE IF NOT EXISTS deployments (
  id TEXT PRIMARY KEY, model_id TEXT NOT NULL, bundle_hash TEXT NOT NULL, bundle_size INTEGER NOT NULL,
  target TEXT NOT NULL, deployed_at TEXT NOT NULL, active INTEGER NOT NULL, drift_delta REAL NOT NULL,
  drift_lambda REAL NOT NULL, auto_tune INTEGER NOT NULL, auto_deploy INTEGER NOT NULL,
  gate_id TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS drift (
  deployment_id TEXT PRIMARY KEY, epoch INTEGER NOT NULL, n INTEGER NOT NULL, mean REAL NOT NULL,
  ph_m REAL NOT NULL, ph_min REAL NOT NULL, alarm INTEGER NOT NULL, alarm_at INTEGER,
  last_seq INTEGER NOT NULL, delta REAL NOT NULL, lambda REAL NOT NULL);
CREATE TABLE IF NOT EXISTS feedback (
  deployment_id TEXT NOT NULL, epoch INTEGER NOT NULL, seq INTEGER NOT NULL, features_json TEXT NOT NULL,
  prediction REAL NOT NULL, observation REAL NOT NULL, ts INTEGER NOT NULL,
  PRIMARY KEY (deployment_id, epoch, seq));
CREATE TABLE IF NOT EXISTS alarms (
  deployment_id TEXT NOT NULL, epoch INTEGER NOT NULL, alarm_at INTEGER NOT NULL, created_at TEXT NOT NULL,
  PRIMARY KEY (deployment_id, epoch));
CREATE TABLE IF NOT EXISTS jobs (
  seq INTEGER PRIMARY KEY AUTOINCREMENT, id TEXT NOT NULL UNIQUE, trigger TEXT NOT NULL,
  trigger_key TEXT NOT NULL, source_model TEXT NOT NULL, target_snapshot TEXT, deployment_id TEXT,
  lambda REAL NOT NULL, tau REAL NOT NULL, status TEXT NOT NULL, result_model TEXT, gate_id TEXT,
  gate_pass INTEGER, reason TEXT, ready_at_seq INTEGER, created_at TEXT NOT NULL,
  UNIQUE (trigger, trigger_key, source_model));
CREATE TABLE IF NOT EXISTS notifications (
  seq INTEGER PRIMARY KEY AUTOINCREMENT, id TEXT NOT NULL UNIQUE, job_id TEXT NOT NULL,
  kind TEXT NOT NULL, message TEXT NOT NULL, created_at TEXT NOT NULL);
)sql";

}  // namespace

Store::Store(const std::filesystem::path& data_dir, Clock clock)
    : data_dir_((std::filesystem::create_directories(data_dir), data_dir)),
      db_(data_dir / "registry.db"),
      blobs_(data_dir / "blobs"),
      clock_(std::move(clock)) {
  db_.exec(kSchema);
}

std::string Store::next_id(std::string_view prefix) {
  Database::Transaction tx(db_);
  std::int64_t next = 1;
  {
    auto st = db_.query("SELECT next FROM counters WHERE prefix = ?", prefix);
    if (st.step()) next = st.integer(0);
  }
  db_.execute("INSERT INTO counters(prefix, next) VALUES(?, ?) "
              "ON CONFLICT(prefix) DO UPDATE SET next = excluded.next",
              prefix, next + 1);
  tx.commit();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06lld", static_cast<long long>(next));
  return std::string(prefix) + "-" + buf;
}

void Store::register_artifact(std::string_view id, std::string_view kind) {
  db_.execute("INSERT OR IGNORE INTO artifacts(id, kind) VALUES(?, ?)", id, kind);
}

void Store::unregister_artifact(std::string_view id) {
  db_.execute("DELETE FROM artifacts WHERE id = ?", id);
}

bool Store::artifact_exists(std::string_view id) {
  auto lk = db_.lock();
  auto st = db_.query("SELECT 1 FROM artifacts WHERE id = ?", id);
  return st.step();
}

std::string Store::artifact_kind(std::string_view id) {
  auto lk = db_.lock();
  auto st = db_.query("SELECT kind FROM artifacts WHERE id = ?", id);
  if (!st.step()) not_found("artifact", id);
  return st.text(0);
}

}  // namespace mmgr

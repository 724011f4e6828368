#include "mmgr/registry.hpp"

#include "mmgr/builtin.hpp"
#include "mmgr/error.hpp"
#include "mmgr/json_io.hpp"
#include "mmgr/linear_model.hpp"
#include "mmgr/sha256.hpp"

#include <cmath>
#include <map>
#include <set>

namespace mmgr {

namespace {

constexpr const char* kModelColumns =
    "id, name, version, artifact_hash, artifact_size, features_json, target, created_by_run, status, "
    "predecessor, created_at";

ModelRecord read_model(const Statement& st) {
  ModelRecord m;
  m.id = st.text(0);
  m.name = st.text(1);
  m.version = st.integer(2);
  m.artifact = {st.text(3), static_cast<std::uint64_t>(st.integer(4))};
  m.input_schema.features = nlohmann::json::parse(st.text(5)).get<std::vector<std::string>>();
  m.input_schema.target = st.text(6);
  m.created_by_run = st.text(7);
  m.status = parse_model_status(st.text(8));
  m.predecessor = st.optional_text(9);
  m.created_at = st.text(10);
  return m;
}

constexpr const char* kRunColumns =
    "id, algorithm, hyperparameters, framework_name, framework_version, framework_extra, input_snapshot, "
    "train_fraction, seed, started_at, finished_at, produced_model";

TrainingRun read_run(const Statement& st) {
  TrainingRun r;
  r.id = st.text(0);
  r.algorithm = st.text(1);
  r.hyperparameters = st.text(2);
  r.framework = {st.text(3), st.text(4), nlohmann::json::parse(st.text(5))};
  r.input_snapshot = st.text(6);
  r.train_fraction = st.real(7);
  r.seed = static_cast<std::uint64_t>(st.integer(8));
  r.started_at = st.text(9);
  r.finished_at = st.text(10);
  r.produced_model = st.text(11);
  return r;
}

constexpr const char* kDeploymentColumns =
    "id, model_id, bundle_hash, bundle_size, target, deployed_at, active, drift_delta, drift_lambda, auto_tune, "
    "auto_deploy, gate_id";

DeploymentRecord read_deployment(const Statement& st) {
  DeploymentRecord d;
  d.id = st.text(0);
  d.model_id = st.text(1);
  d.bundle = {st.text(2), static_cast<std::uint64_t>(st.integer(3))};
  d.target = st.text(4);
  d.deployed_at = st.text(5);
  d.active = st.integer(6) != 0;
  d.drift_delta = st.real(7);
  d.drift_lambda = st.real(8);
  d.auto_tune = st.integer(9) != 0;
  d.auto_deploy = st.integer(10) != 0;
  d.gate_id = st.text(11);
  return d;
}

EvaluationReport read_evaluation(const Statement& st) {
  EvaluationReport r;
  r.id = st.text(0);
  r.model_id = st.text(1);
  r.snapshot_id = st.text(2);
  r.metrics = {st.real(3), st.real(4), st.real(5), static_cast<std::uint64_t>(st.integer(6))};
  r.evaluated_at = st.text(7);
  return r;
}

}  // namespace

std::string_view to_string(ModelStatus s) {
  switch (s) {
    case ModelStatus::candidate: return "candidate";
    case ModelStatus::validated: return "validated";
    case ModelStatus::deployed: return "deployed";
    case ModelStatus::retired: return "retired";
  }
  return "candidate";
}

ModelStatus parse_model_status(std::string_view s) {
  for (auto st : {ModelStatus::candidate, ModelStatus::validated, ModelStatus::deployed, ModelStatus::retired}) {
    if (to_string(st) == s) return st;
  }
  fail(ErrorCode::validation, "unknown model status: " + std::string(s), Json{{"status", s}});
}

bool is_legal_transition(ModelStatus from, ModelStatus to) {
  if (to == ModelStatus::retired) return from != ModelStatus::retired;
  return (from == ModelStatus::candidate && to == ModelStatus::validated) ||
         (from == ModelStatus::validated && to == ModelStatus::deployed);
}

std::pair<TrainingRun, ModelRecord> Registry::record_training_run(const RunSpec& spec, const BlobRef& artifact) {
  if (spec.model_name.empty()) fail(ErrorCode::validation, "model name must not be empty");
  if (spec.algorithm.empty()) fail(ErrorCode::validation, "algorithm must not be empty");
  {
    auto hp = nlohmann::json::parse(spec.hyperparameters, nullptr, false);
    if (hp.is_discarded() || !hp.is_object() || hp.dump() != spec.hyperparameters) {
      fail(ErrorCode::validation,
           "hyperparameters must be a canonical JSON object (sorted keys, no insignificant whitespace)",
           Json{{"hyperparameters", spec.hyperparameters}});
    }
  }
  if (!(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0)) {
    fail(ErrorCode::validation, "train_fraction must lie in (0, 1]");
  }
  if (!spec.framework.extra.is_object()) fail(ErrorCode::validation, "framework extra must be an object");

  auto& db = store_.db();
  Database::Transaction tx(db);
  const std::string now = store_.now();
  const std::string started = spec.started_at.empty() ? now : spec.started_at;
  const std::string finished = spec.finished_at.empty() ? now : spec.finished_at;
  if (finished < started) fail(ErrorCode::validation, "finished_at precedes started_at");

  artifacts_.get_snapshot(spec.input_snapshot);
  if (!store_.blobs().contains(artifact.hash)) not_found("blob", artifact.hash);

  InputSchema schema;
  try {
    const LinearModel m = deserialize(store_.blobs().get(artifact.hash));
    schema = {m.feature_names, m.target_name};
  } catch (const Error& e) {
    if (e.code() != ErrorCode::unsupported) throw;
    if (!spec.input_schema) {
      fail(ErrorCode::validation, "input_schema is required for non built-in model artifacts");
    }
    schema = *spec.input_schema;
  }

  const auto previous = latest_version(spec.model_name);
  TrainingRun run;
  run.id = store_.next_id("run");
  run.algorithm = spec.algorithm;
  run.hyperparameters = spec.hyperparameters;
  run.framework = spec.framework;
  run.input_snapshot = spec.input_snapshot;
  run.train_fraction = spec.train_fraction;
  run.seed = spec.seed;
  run.started_at = started;
  run.finished_at = finished;

  ModelRecord model;
  model.id = store_.next_id("model");
  model.name = spec.model_name;
  model.version = previous ? previous->version + 1 : 1;
  model.artifact = artifact;
  model.input_schema = schema;
  model.created_by_run = run.id;
  model.predecessor = previous ? std::optional(previous->id) : std::nullopt;
  model.created_at = now;
  run.produced_model = model.id;

  db.execute(std::string("INSERT INTO runs(") + kRunColumns + ") VALUES(?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)", run.id,
             run.algorithm, run.hyperparameters, run.framework.name, run.framework.version,
             run.framework.extra.dump(), run.input_snapshot, run.train_fraction, run.seed, run.started_at,
             run.finished_at, run.produced_model);
  db.execute(std::string("INSERT INTO models(") + kModelColumns + ") VALUES(?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
             model.id, model.name, model.version, model.artifact.hash, model.artifact.size,
             nlohmann::json(schema.features).dump(), schema.target, model.created_by_run, to_string(model.status),
             model.predecessor, model.created_at);
  store_.register_artifact(run.id, "run");
  store_.register_artifact(model.id, "model");
  lineage_.add_link(model.id, run.input_snapshot, LinkKind::trained_on);
  tx.commit();
  return {run, model};
}

ModelRecord Registry::transition_status(std::string_view model_id, ModelStatus next) {
  auto& db = store_.db();
  Database::Transaction tx(db);
  ModelRecord m = get_model(model_id);
  if (!is_legal_transition(m.status, next)) {
    fail(ErrorCode::state,
         "illegal status transition " + std::string(to_string(m.status)) + " -> " + std::string(to_string(next)),
         Json{{"current", to_string(m.status)}, {"requested", to_string(next)}});
  }
  if (next == ModelStatus::validated || next == ModelStatus::deployed) {
    const auto verdict = latest_gate(m.id);
    if (!verdict || !verdict->overall) {
      fail(ErrorCode::state, "model " + m.id + " has no passing gate verdict",
           Json{{"reason", "gate_required"}, {"current", to_string(m.status)}, {"requested", to_string(next)}});
    }
  }
  if (next == ModelStatus::deployed) {
    db.execute("UPDATE models SET status = 'retired' WHERE name = ? AND status = 'deployed' AND id != ?", m.name,
               m.id);
  }
  db.execute("UPDATE models SET status = ? WHERE id = ?", to_string(next), m.id);
  m.status = next;
  tx.commit();
  return m;
}

BlobRef Registry::reproduce_run(std::string_view run_id) {
  const TrainingRun run = get_run(run_id);
  if (!is_builtin(run.algorithm)) {
    fail(ErrorCode::unsupported, "cannot re-execute algorithm " + run.algorithm, Json{{"algorithm", run.algorithm}});
  }
  Table table;
  LinearModel model;
  try {
    table = artifacts_.materialize(run.input_snapshot);
    model = run_builtin(run.algorithm, run.hyperparameters, table, run.train_fraction, run.seed, artifacts_);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::not_found) throw;
    fail(ErrorCode::corruption, "run inputs are missing: " + std::string(e.what()), Json{{"run", run.id}});
  }
  return store_.blobs().put(serialize(model));
}

ModelRecord Registry::get_model(std::string_view id) {
  auto& db = store_.db();
  auto lk = db.lock();
  auto st = db.query(std::string("SELECT ") + kModelColumns + " FROM models WHERE id = ?", id);
  if (!st.step()) not_found("model", id);
  return read_model(st);
}

std::vector<ModelRecord> Registry::list_models(const std::optional<std::string>& name) {
  auto& db = store_.db();
  auto lk = db.lock();
  std::vector<ModelRecord> out;
  if (name) {
    auto st = db.query(std::string("SELECT ") + kModelColumns + " FROM models WHERE name = ? ORDER BY version", *name);
    while (st.step()) out.push_back(read_model(st));
  } else {
    auto st = db.query(std::string("SELECT ") + kModelColumns + " FROM models ORDER BY name, version");
    while (st.step()) out.push_back(read_model(st));
  }
  return out;
}

std::vector<ModelRecord> Registry::history(std::string_view name) {
  auto out = list_models(std::string(name));
  if (out.empty()) not_found("model name", name);
  return out;
}

std::optional<ModelRecord> Registry::latest_version(std::string_view name) {
  auto& db = store_.db();
  auto lk = db.lock();
  auto st = db.query(std::string("SELECT ") + kModelColumns + " FROM models WHERE name = ? ORDER BY version DESC LIMIT 1",
                     name);
  if (!st.step()) return std::nullopt;
  return read_model(st);
}

std::optional<ModelRecord> Registry::deployed_model(std::string_view name) {
  auto& db = store_.db();
  auto lk = db.lock();
  auto st = db.query(std::string("SELECT ") + kModelColumns + " FROM models WHERE name = ? AND status = 'deployed'",
                     name);
  if (!st.step()) return std::nullopt;
  return read_model(st);
}

TrainingRun Registry::get_run(std::string_view id) {
  auto& db = store_.db();
  auto lk = db.lock();
  auto st = db.query(std::string("SELECT ") + kRunColumns + " FROM runs WHERE id = ?", id);
  if (!st.step()) not_found("run", id);
  return read_run(st);
}

TrainingRun Registry::run_for_model(std::string_view model_id) { return get_run(get_model(model_id).created_by_run); }

EvaluationReport Registry::put_evaluation(std::string_view model_id, std::string_view snapshot_id,
                                          const Metrics& metrics) {
  auto& db = store_.db();
  Database::Transaction tx(db);
  EvaluationReport r;
  if (auto existing = find_evaluation(model_id, snapshot_id)) {
    r.id = existing->id;
  } else {
    r.id = store_.next_id("eval");
    store_.register_artifact(r.id, "evaluation");
  }
  r.model_id = std::string(model_id);
  r.snapshot_id = std::string(snapshot_id);
  r.metrics = metrics;
  r.evaluated_at = store_.now();
  db.execute(
      "INSERT INTO evaluations(id, model_id, snapshot_id, rmse, mae, r2, n, evaluated_at) VALUES(?, ?, ?, ?, ?, ?, ?, ?) "
      "ON CONFLICT(model_id, snapshot_id) DO UPDATE SET rmse = excluded.rmse, mae = excluded.mae, r2 = excluded.r2, "
      "n = excluded.n, evaluated_at = excluded.evaluated_at",
      r.id, r.model_id, r.snapshot_id, metrics.rmse, metrics.mae, metrics.r2, metrics.n, r.evaluated_at);
  tx.commit();
  return r;
}

std::optional<EvaluationReport> Registry::find_evaluation(std::string_view model_id, std::string_view snapshot_id) {
  auto& db = store_.db();
  auto lk = db.lock();
  auto st = db.query(
      "SELECT id, model_id, snapshot_id, rmse, mae, r2, n, evaluated_at FROM evaluations "
      "WHERE model_id = ? AND snapshot_id = ?",
      model_id, snapshot_id);
  if (!st.step()) return std::nullopt;
  return read_evaluation(st);
}

std::vector<EvaluationReport> Registry::evaluations(std::string_view model_id) {
  auto& db = store_.db();
  auto lk = db.lock();
  get_model(model_id);
  std::vector<EvaluationReport> out;
  auto st = db.query(
      "SELECT id, model_id, snapshot_id, rmse, mae, r2, n, evaluated_at FROM evaluations WHERE model_id = ? "
      "ORDER BY snapshot_id",
      model_id);
  while (st.step()) out.push_back(read_evaluation(st));
  return out;
}

GateVerdict Registry::put_gate(GateVerdict verdict) {
  auto& db = store_.db();
  Database::Transaction tx(db);
  verdict.id = store_.next_id("gate");
  verdict.created_at = store_.now();
  db.execute("INSERT INTO gates(id, model_id, overall, verdict_json) VALUES(?, ?, ?, ?)", verdict.id,
             verdict.candidate, verdict.overall, to_json(verdict).dump());
  store_.register_artifact(verdict.id, "gate");
  tx.commit();
  return verdict;
}

std::optional<GateVerdict> Registry::latest_gate(std::string_view model_id) {
  auto& db = store_.db();
  auto lk = db.lock();
  auto st = db.query("SELECT verdict_json FROM gates WHERE model_id = ? ORDER BY seq DESC LIMIT 1", model_id);
  if (!st.step()) return std::nullopt;
  return gate_from_json(Json::parse(st.text(0)));
}

GateVerdict Registry::get_gate(std::string_view gate_id) {
  auto& db = store_.db();
  auto lk = db.lock();
  auto st = db.query("SELECT verdict_json FROM gates WHERE id = ?", gate_id);
  if (!st.step()) not_found("gate verdict", gate_id);
  return gate_from_json(Json::parse(st.text(0)));
}

DeploymentRecord Registry::insert_deployment(DeploymentRecord d) {
  auto& db = store_.db();
  Database::Transaction tx(db);
  get_model(d.model_id);
  db.execute("UPDATE deployments SET active = 0 WHERE target = ? AND active = 1", d.target);
  d.id = store_.next_id("dep");
  d.deployed_at = store_.now();
  d.active = true;
  db.execute(std::string("INSERT INTO deployments(") + kDeploymentColumns +
                 ") VALUES(?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
             d.id, d.model_id, d.bundle.hash, d.bundle.size, d.target, d.deployed_at, d.active, d.drift_delta,
             d.drift_lambda, d.auto_tune, d.auto_deploy, d.gate_id);
  store_.register_artifact(d.id, "deployment");
  tx.commit();
  return d;
}

DeploymentRecord Registry::get_deployment(std::string_view id) {
  auto& db = store_.db();
  auto lk = db.lock();
  auto st = db.query(std::string("SELECT ") + kDeploymentColumns + " FROM deployments WHERE id = ?", id);
  if (!st.step()) not_found("deployment", id);
  return read_deployment(st);
}

std::vector<DeploymentRecord> Registry::list_deployments() {
  auto& db = store_.db();
  auto lk = db.lock();
  std::vector<DeploymentRecord> out;
  auto st = db.query(std::string("SELECT ") + kDeploymentColumns + " FROM deployments ORDER BY id");
  while (st.step()) out.push_back(read_deployment(st));
  return out;
}

std::optional<DeploymentRecord> Registry::active_deployment(std::string_view target) {
  auto& db = store_.db();
  auto lk = db.lock();
  auto st = db.query(std::string("SELECT ") + kDeploymentColumns + " FROM deployments WHERE target = ? AND active = 1",
                     target);
  if (!st.step()) return std::nullopt;
  return read_deployment(st);
}

void Registry::deactivate_deployment(std::string_view id) {
  auto& db = store_.db();
  Database::Transaction tx(db);
  get_deployment(id);
  db.execute("UPDATE deployments SET active = 0 WHERE id = ?", id);
  tx.commit();
}

AuditReport Registry::audit() {
  auto& db = store_.db();
  auto lk = db.lock();
  AuditReport report;
  auto& v = report.violations;
  auto exists = [&](const char* table, const std::string& id) {
    auto st = db.query(std::string("SELECT 1 FROM ") + table + " WHERE id = ?", id);
    return st.step();
  };

  {
    auto st = db.query("SELECT id, input_snapshot, produced_model, started_at, finished_at FROM runs ORDER BY id");
    while (st.step()) {
      const auto id = st.text(0);
      if (!exists("snapshots", st.text(1))) v.push_back(id + ": input snapshot " + st.text(1) + " missing");
      if (!exists("models", st.text(2))) v.push_back(id + ": produced model " + st.text(2) + " missing");
      if (st.text(4) < st.text(3)) v.push_back(id + ": finished before it started");
    }
  }
  {
    std::map<std::string, std::int64_t> last_version;
    std::map<std::string, int> deployed_per_name;
    auto st = db.query(std::string("SELECT ") + kModelColumns + " FROM models ORDER BY id");
    while (st.step()) {
      const ModelRecord m = read_model(st);
      if (!exists("runs", m.created_by_run)) v.push_back(m.id + ": run " + m.created_by_run + " missing");
      if (m.predecessor && !exists("models", *m.predecessor)) {
        v.push_back(m.id + ": predecessor " + *m.predecessor + " missing");
      }
      if (!store_.blobs().contains(m.artifact.hash)) v.push_back(m.id + ": artifact blob missing");
      auto& last = last_version[m.name];
      if (m.version != last + 1) {
        v.push_back(m.id + ": version " + std::to_string(m.version) + " does not follow " + std::to_string(last));
      }
      last = m.version;
      if (m.status == ModelStatus::deployed && ++deployed_per_name[m.name] > 1) {
        v.push_back(m.name + ": more than one deployed version");
      }
    }
  }
  {
    auto st = db.query("SELECT id, model_id, snapshot_id FROM evaluations ORDER BY id");
    while (st.step()) {
      if (!exists("models", st.text(1))) v.push_back(st.text(0) + ": model " + st.text(1) + " missing");
      if (!exists("snapshots", st.text(2))) v.push_back(st.text(0) + ": snapshot " + st.text(2) + " missing");
    }
  }
  {
    auto st = db.query("SELECT id, parent FROM snapshots WHERE parent IS NOT NULL");
    while (st.step()) {
      if (!exists("snapshots", st.text(1))) v.push_back(st.text(0) + ": parent " + st.text(1) + " missing");
    }
  }
  {
    std::map<std::string, int> active_per_target;
    auto st = db.query(std::string("SELECT ") + kDeploymentColumns + " FROM deployments ORDER BY id");
    while (st.step()) {
      const DeploymentRecord d = read_deployment(st);
      if (!exists("models", d.model_id)) v.push_back(d.id + ": model " + d.model_id + " missing");
      if (!store_.blobs().contains(d.bundle.hash)) v.push_back(d.id + ": bundle blob missing");
      if (d.active && ++active_per_target[d.target] > 1) v.push_back(d.target + ": more than one active deployment");
      auto g = db.query("SELECT model_id, overall FROM gates WHERE id = ?", d.gate_id);
      if (!g.step()) {
        v.push_back(d.id + ": deployed without a recorded gate verdict");
      } else if (g.text(0) != d.model_id || g.integer(1) == 0) {
        v.push_back(d.id + ": gate " + d.gate_id + " is not a passing verdict for " + d.model_id);
      }
    }
  }
  {
    auto st = db.query("SELECT id, status, result_model, gate_pass FROM jobs ORDER BY id");
    while (st.step()) {
      if (!st.is_null(2) && !exists("models", st.text(2))) v.push_back(st.text(0) + ": result model missing");
    }
  }
  {
    auto st = db.query("SELECT from_id, to_id, kind FROM links ORDER BY from_id, to_id, kind");
    while (st.step()) {
      for (int c = 0; c < 2; ++c) {
        if (!exists("artifacts", st.text(c))) {
          v.push_back("link " + st.text(0) + " " + st.text(2) + " " + st.text(1) + ": endpoint missing");
        }
      }
    }
  }
  for (LinkKind k : kAllLinkKinds) {
    if (!is_acyclic(k)) continue;
    auto cycle = lineage_.find_cycle(k);
    if (!cycle.empty()) v.push_back(std::string(to_string(k)) + ": cycle through " + cycle.front());
  }
  return report;
}

std::string Registry::models_fingerprint() {
  auto& db = store_.db();
  auto lk = db.lock();
  std::string acc;
  auto st = db.query(std::string("SELECT ") + kModelColumns + " FROM models ORDER BY id");
  while (st.step()) {
    for (int i = 0; i < 11; ++i) acc += st.text(i) + '\x1f';
    acc += '\n';
  }
  return sha256_hex(acc);
}

}  // namespace mmgr

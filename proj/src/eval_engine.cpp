#include "mmgr/eval_engine.hpp"

#include "mmgr/error.hpp"
#include "mmgr/linear_model.hpp"

#include <algorithm>
#include <cmath>

namespace mmgr {

Metrics compute_metrics(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size()) fail(ErrorCode::validation, "prediction and target lengths differ");
  if (y.empty()) fail(ErrorCode::validation, "cannot compute metrics on zero rows");
  const double n = static_cast<double>(y.size());
  double sse = 0.0, sae = 0.0, max_abs = 0.0, sum_y = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i]) || !std::isfinite(y_hat[i])) {
      fail(ErrorCode::validation, "non-finite value at row " + std::to_string(i + 1));
    }
    const double e = y[i] - y_hat[i];
    sse += e * e;
    sae += std::abs(e);
    max_abs = std::max(max_abs, std::abs(e));
    sum_y += y[i];
  }
  const double mean_y = sum_y / n;
  double sst = 0.0;
  for (double v : y) sst += (v - mean_y) * (v - mean_y);

  Metrics m;
  m.n = y.size();
  m.mae = sae / n;
  // Rounding can push sqrt(mean e^2) a hair outside [mae, max|e|].
  m.rmse = std::clamp(std::sqrt(sse / n), m.mae, max_abs);
  if (sst == 0.0) {
    if (sse > 0.0) fail(ErrorCode::validation, "degenerate target: constant column predicted with error");
    m.r2 = 0.0;
  } else {
    m.r2 = 1.0 - sse / sst;
  }
  return m;
}

SnapshotVerdict judge_snapshot(std::string snapshot_id, double candidate_rmse, std::optional<double> predecessor_rmse,
                               double train_rmse, const GateConfig& config) {
  SnapshotVerdict v;
  v.snapshot_id = std::move(snapshot_id);
  v.candidate_rmse = candidate_rmse;
  v.predecessor_rmse = predecessor_rmse;
  v.threshold = predecessor_rmse ? std::max(*predecessor_rmse * (1.0 + config.epsilon), config.abs_floor)
                                 : std::max(config.abs_factor * train_rmse, config.abs_floor);
  v.pass = candidate_rmse <= v.threshold;
  return v;
}

namespace {

LinearModel load_model(Store& store, const ModelRecord& m) {
  try {
    return deserialize(store.blobs().get(m.artifact.hash));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::unsupported) throw;
    fail(ErrorCode::unsupported, "model " + m.id + " is not a built-in linear model and cannot be executed",
         Json{{"model", m.id}});
  }
}

}  // namespace

EvaluationReport EvalEngine::evaluate(std::string_view model_id, std::string_view snapshot_id) {
  Database::Transaction tx(store_.db());
  const ModelRecord m = registry_.get_model(model_id);
  artifacts_.get_snapshot(snapshot_id);
  const Table table = artifacts_.materialize(snapshot_id);

  Json missing = Json::array();
  for (const auto& f : m.input_schema.features) {
    if (!table.find(f)) missing.push_back(f);
  }
  if (!table.find(m.input_schema.target)) missing.push_back(m.input_schema.target);
  if (!missing.empty()) {
    fail(ErrorCode::schema, "snapshot " + std::string(snapshot_id) + " lacks columns " + missing.dump(),
         Json{{"missing", missing}, {"snapshot", snapshot_id}});
  }

  const LinearModel model = load_model(store_, m);
  const auto predictions = predict(model, table);
  const Metrics metrics = compute_metrics(table.numeric(m.input_schema.target), predictions);
  auto report = registry_.put_evaluation(m.id, snapshot_id, metrics);
  lineage_.ensure_link(m.id, snapshot_id, LinkKind::evaluated_on);
  tx.commit();
  return report;
}

std::vector<std::string> EvalEngine::evaluation_set(std::string_view model_id) {
  auto lk = store_.db().lock();
  const TrainingRun run = registry_.run_for_model(model_id);
  const Traversal legs[] = {
      {LinkKind::compatible_with, false},
      {LinkKind::compatible_with, true},
      {LinkKind::newer_recording_of, true},
  };
  std::vector<std::string> out{run.input_snapshot};
  for (auto& id : lineage_.reachable(run.input_snapshot, legs)) {
    if (id != run.input_snapshot && store_.artifact_kind(id) == "snapshot") out.push_back(std::move(id));
  }
  return out;
}

AutoEvaluation EvalEngine::auto_evaluate(std::string_view model_id) {
  Database::Transaction tx(store_.db());
  AutoEvaluation result;
  for (const auto& snap : evaluation_set(model_id)) {
    try {
      result.reports.push_back(evaluate(model_id, snap));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::schema && e.code() != ErrorCode::validation) throw;
      result.skipped.push_back({snap, e.what()});
    }
  }
  tx.commit();
  return result;
}

double EvalEngine::train_rmse(std::string_view model_id) {
  auto lk = store_.db().lock();
  const ModelRecord m = registry_.get_model(model_id);
  const TrainingRun run = registry_.get_run(m.created_by_run);
  const Table table = artifacts_.materialize(run.input_snapshot);
  const LinearModel model = load_model(store_, m);
  const auto all = predict(model, table);
  const auto& y_all = table.numeric(m.input_schema.target);
  std::vector<double> y, y_hat;
  for (std::size_t r : train_rows(table.row_count, run.train_fraction, run.seed)) {
    y.push_back(y_all[r]);
    y_hat.push_back(all[r]);
  }
  double sse = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) sse += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
  return y.empty() ? 0.0 : std::sqrt(sse / static_cast<double>(y.size()));
}

GateVerdict EvalEngine::gate(std::string_view candidate_id) {
  Database::Transaction tx(store_.db());
  const ModelRecord cand = registry_.get_model(candidate_id);
  GateVerdict verdict;
  verdict.candidate = cand.id;
  verdict.predecessor = cand.predecessor;
  verdict.epsilon = config_.epsilon;

  auto try_evaluate = [&](const std::string& model, const std::string& snap) -> std::optional<double> {
    try {
      return evaluate(model, snap).metrics.rmse;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::schema && e.code() != ErrorCode::validation) throw;
      return std::nullopt;
    }
  };

  const double train = cand.predecessor ? 0.0 : train_rmse(cand.id);
  Json considered = Json::array();
  for (const auto& snap : evaluation_set(cand.id)) {
    considered.push_back(snap);
    const auto c = try_evaluate(cand.id, snap);
    if (!c) continue;
    std::optional<double> p;
    if (cand.predecessor) {
      p = try_evaluate(*cand.predecessor, snap);
      if (!p) continue;
    }
    verdict.snapshots.push_back(judge_snapshot(snap, *c, p, train, config_));
  }
  if (verdict.snapshots.empty()) {
    fail(ErrorCode::inconclusive, "no snapshot is evaluable by both candidate and predecessor",
         Json{{"candidate", cand.id}, {"predecessor", cand.predecessor ? Json(*cand.predecessor) : Json()}, {"considered", considered}});
  }
  verdict.overall = std::all_of(verdict.snapshots.begin(), verdict.snapshots.end(),
                                [](const SnapshotVerdict& v) { return v.pass; });
  verdict = registry_.put_gate(std::move(verdict));
  tx.commit();
  return verdict;
}

}  // namespace mmgr

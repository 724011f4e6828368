#include "mmgr/drift_monitor.hpp"

#include "mmgr/error.hpp"

#include <algorithm>
#include <cmath>

namespace mmgr {

PageHinkleyState page_hinkley_update(const PageHinkleyState& s, double e, const PageHinkleyParams& params) {
  PageHinkleyState next = s;
  next.n = s.n + 1;
  next.mean = s.mean + (e - s.mean) / static_cast<double>(next.n);
  next.ph_m = s.ph_m + ((e - next.mean) - params.delta);
  next.ph_min = std::min(s.ph_min, next.ph_m);
  if (!s.alarm && next.ph_m - next.ph_min > params.lambda) {
    next.alarm = true;
    next.alarm_at = next.n;
  }
  return next;
}

PageHinkleyParams default_drift_params(double train_residual_std, const DriftDefaults& d) {
  const double scale = std::max(train_residual_std, d.min_scale);
  return {d.delta_factor * scale, d.lambda_factor * scale};
}

namespace {

DriftState load_state(Database& db, std::string_view deployment_id) {
  auto st = db.query(
      "SELECT epoch, n, mean, ph_m, ph_min, alarm, alarm_at, last_seq, delta, lambda FROM drift "
      "WHERE deployment_id = ?",
      deployment_id);
  if (!st.step()) not_found("drift state", deployment_id);
  DriftState s;
  s.deployment_id = std::string(deployment_id);
  s.epoch = static_cast<std::uint64_t>(st.integer(0));
  s.ph.n = static_cast<std::uint64_t>(st.integer(1));
  s.ph.mean = st.real(2);
  s.ph.ph_m = st.real(3);
  s.ph.ph_min = st.real(4);
  s.ph.alarm = st.integer(5) != 0;
  if (!st.is_null(6)) s.ph.alarm_at = static_cast<std::uint64_t>(st.integer(6));
  s.last_seq = static_cast<std::uint64_t>(st.integer(7));
  s.params = {st.real(8), st.real(9)};
  return s;
}

void save_state(Database& db, const DriftState& s) {
  db.execute(
      "UPDATE drift SET epoch = ?, n = ?, mean = ?, ph_m = ?, ph_min = ?, alarm = ?, alarm_at = ?, last_seq = ? "
      "WHERE deployment_id = ?",
      s.epoch, s.ph.n, s.ph.mean, s.ph.ph_m, s.ph.ph_min, s.ph.alarm, s.ph.alarm_at, s.last_seq, s.deployment_id);
}

}  // namespace

void DriftMonitor::init_deployment(std::string_view deployment_id, const PageHinkleyParams& params) {
  if (!(params.delta >= 0.0) || !(params.lambda > 0.0) || !std::isfinite(params.delta) ||
      !std::isfinite(params.lambda)) {
    fail(ErrorCode::validation, "drift parameters need delta >= 0 and lambda > 0");
  }
  auto& db = store_.db();
  Database::Transaction tx(db);
  db.execute(
      "INSERT INTO drift(deployment_id, epoch, n, mean, ph_m, ph_min, alarm, alarm_at, last_seq, delta, lambda) "
      "VALUES(?, 0, 0, 0, 0, 0, 0, NULL, 0, ?, ?)",
      deployment_id, params.delta, params.lambda);
  tx.commit();
}

DriftState DriftMonitor::ingest_feedback(const FeedbackEvent& event) {
  auto& db = store_.db();
  Database::Transaction tx(db);
  const DeploymentRecord dep = registry_.get_deployment(event.deployment_id);
  DriftState s = load_state(db, event.deployment_id);
  if (!dep.active) {
    fail(ErrorCode::state, "deployment " + dep.id + " is no longer active",
         Json{{"reason", "inactive"}, {"deployment", dep.id}});
  }
  if (event.seq != s.last_seq + 1) {
    fail(ErrorCode::ordering,
         "expected feedback seq " + std::to_string(s.last_seq + 1) + ", got " + std::to_string(event.seq),
         Json{{"expected", s.last_seq + 1}, {"got", event.seq}});
  }
  if (!std::isfinite(event.prediction) || !std::isfinite(event.observation)) {
    fail(ErrorCode::validation, "prediction and observation must be finite");
  }
  const ModelRecord model = registry_.get_model(dep.model_id);
  Json missing = Json::array();
  for (const auto& f : model.input_schema.features) {
    auto it = event.features.find(f);
    if (it == event.features.end()) {
      missing.push_back(f);
    } else if (!std::isfinite(it->second)) {
      fail(ErrorCode::validation, "feature " + f + " is not finite");
    }
  }
  if (!missing.empty()) {
    fail(ErrorCode::schema, "feedback lacks model features " + missing.dump(), Json{{"missing", missing}});
  }

  Json features = Json::object();
  for (const auto& [k, v] : event.features) features[k] = v;
  db.execute(
      "INSERT INTO feedback(deployment_id, epoch, seq, features_json, prediction, observation, ts) "
      "VALUES(?, ?, ?, ?, ?, ?, ?)",
      event.deployment_id, s.epoch, event.seq, features.dump(), event.prediction, event.observation, event.ts);

  const bool was_alarmed = s.ph.alarm;
  s.ph = page_hinkley_update(s.ph, std::abs(event.observation - event.prediction), s.params);
  s.last_seq = event.seq;
  save_state(db, s);
  const bool raised = !was_alarmed && s.ph.alarm;
  if (raised) {
    db.execute("INSERT INTO alarms(deployment_id, epoch, alarm_at, created_at) VALUES(?, ?, ?, ?)", s.deployment_id,
               s.epoch, *s.ph.alarm_at, store_.now());
  }
  tx.commit();
  if (raised && listener_) listener_(s.deployment_id, s.epoch, *s.ph.alarm_at);
  return s;
}

DriftState DriftMonitor::state(std::string_view deployment_id) {
  auto lk = store_.db().lock();
  return load_state(store_.db(), deployment_id);
}

DriftState DriftMonitor::reset_drift(std::string_view deployment_id) {
  auto& db = store_.db();
  Database::Transaction tx(db);
  DriftState s = load_state(db, deployment_id);
  s.epoch += 1;
  s.ph = PageHinkleyState{};
  s.last_seq = 0;
  save_state(db, s);
  tx.commit();
  return s;
}

std::vector<FeedbackEvent> DriftMonitor::events(std::string_view deployment_id, const FeedbackRange& range) {
  auto& db = store_.db();
  auto lk = db.lock();
  const DriftState s = load_state(db, deployment_id);
  if (range.last_n && (range.first || range.last)) {
    fail(ErrorCode::validation, "give either a seq range or last_n, not both");
  }
  if (range.first && range.last && *range.first > *range.last) {
    fail(ErrorCode::validation, "feedback range is empty: first > last");
  }
  std::uint64_t lo = range.first.value_or(1);
  std::uint64_t hi = range.last.value_or(s.last_seq);
  if (range.last_n) {
    if (*range.last_n == 0) fail(ErrorCode::validation, "last_n must be positive");
    hi = s.last_seq;
    lo = s.last_seq >= *range.last_n ? s.last_seq - *range.last_n + 1 : 1;
  }
  std::vector<FeedbackEvent> out;
  auto st = db.query(
      "SELECT seq, features_json, prediction, observation, ts FROM feedback "
      "WHERE deployment_id = ? AND epoch = ? AND seq BETWEEN ? AND ? ORDER BY seq",
      deployment_id, s.epoch, lo, hi);
  while (st.step()) {
    FeedbackEvent e;
    e.deployment_id = std::string(deployment_id);
    e.seq = static_cast<std::uint64_t>(st.integer(0));
    e.features = nlohmann::json::parse(st.text(1)).get<std::map<std::string, double>>();
    e.prediction = st.real(2);
    e.observation = st.real(3);
    e.ts = st.integer(4);
    e.epoch = s.epoch;
    out.push_back(std::move(e));
  }
  return out;
}

Snapshot DriftMonitor::feedback_to_snapshot(std::string_view deployment_id, const FeedbackRange& range) {
  auto& db = store_.db();
  Database::Transaction tx(db);
  const auto evs = events(deployment_id, range);
  if (evs.empty()) fail(ErrorCode::validation, "no feedback events in the requested range");
  const DeploymentRecord dep = registry_.get_deployment(deployment_id);
  const ModelRecord model = registry_.get_model(dep.model_id);
  const TrainingRun run = registry_.get_run(model.created_by_run);
  const Snapshot training = artifacts_.get_snapshot(run.input_snapshot);

  Table table;
  table.row_count = evs.size();
  for (const auto& f : model.input_schema.features) {
    Column c{f, ColumnType::Float, {}, {}};
    for (const auto& e : evs) c.numbers.push_back(e.features.at(f));
    table.columns.push_back(std::move(c));
  }
  Column target{model.input_schema.target, ColumnType::Float, {}, {}};
  for (const auto& e : evs) target.numbers.push_back(e.observation);
  table.columns.push_back(std::move(target));

  Snapshot snap = artifacts_.ingest_table(training.dataset_id, table, training.id);
  lineage_.add_link(snap.id, training.id, LinkKind::newer_recording_of,
                    "feedback " + std::string(deployment_id) + " seq " + std::to_string(evs.front().seq) + ".." +
                        std::to_string(evs.back().seq));
  tx.commit();
  return snap;
}

}  // namespace mmgr

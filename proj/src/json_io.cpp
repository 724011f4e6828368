#include "mmgr/json_io.hpp"

#include <cmath>

namespace mmgr {

namespace {

template <class T>
Json opt(const std::optional<T>& v) {
  return v ? Json(*v) : Json();
}

template <class T>
T required(const Json& j, const char* key, const char* what) {
  if (!j.contains(key)) fail(ErrorCode::validation, std::string(what) + ": missing field " + key, Json{{"field", key}});
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::validation, std::string(what) + ": mistyped field " + key, Json{{"field", key}});
  }
}

}  // namespace

Json to_json(const BlobRef& r) { return {{"hash", r.hash}, {"size", r.size}}; }

Json to_json(const Dataset& d) {
  return {{"id", d.id},
          {"name", d.name},
          {"description", d.description},
          {"created_at", d.created_at},
          {"snapshots", d.snapshots}};
}

Json to_json(const Snapshot& s) {
  Json schema = Json::array();
  for (const auto& c : s.schema) schema.push_back({{"name", c.name}, {"type", to_string(c.type)}});
  return {{"id", s.id},
          {"dataset_id", s.dataset_id},
          {"blob", to_json(s.blob)},
          {"schema", schema},
          {"row_count", s.row_count},
          {"created_at", s.created_at},
          {"parent", opt(s.parent)}};
}

Json to_json(const LineageEdge& e) {
  return {{"from", e.from},
          {"to", e.to},
          {"kind", to_string(e.kind)},
          {"created_at", e.created_at},
          {"annotation", opt(e.annotation)}};
}

Json to_json(const TrainingRun& r) {
  return {{"id", r.id},
          {"algorithm", r.algorithm},
          {"hyperparameters", r.hyperparameters},
          {"framework", {{"name", r.framework.name}, {"version", r.framework.version}, {"extra", Json(r.framework.extra)}}},
          {"input_snapshot", r.input_snapshot},
          {"train_fraction", r.train_fraction},
          {"seed", r.seed},
          {"started_at", r.started_at},
          {"finished_at", r.finished_at},
          {"produced_model", r.produced_model}};
}

Json to_json(const InputSchema& s) { return {{"features", s.features}, {"target", s.target}}; }

InputSchema schema_from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorCode::validation, "input_schema must be an object");
  InputSchema s;
  s.features = required<std::vector<std::string>>(j, "features", "input_schema");
  s.target = required<std::string>(j, "target", "input_schema");
  return s;
}

Json to_json(const ModelRecord& m) {
  return {{"id", m.id},
          {"name", m.name},
          {"version", m.version},
          {"artifact", to_json(m.artifact)},
          {"input_schema", to_json(m.input_schema)},
          {"created_by_run", m.created_by_run},
          {"status", to_string(m.status)},
          {"predecessor", opt(m.predecessor)},
          {"created_at", m.created_at}};
}

Json to_json(const Metrics& m) { return {{"rmse", m.rmse}, {"mae", m.mae}, {"r2", m.r2}, {"n", m.n}}; }

Json to_json(const EvaluationReport& r) {
  return {{"id", r.id},
          {"model_id", r.model_id},
          {"snapshot_id", r.snapshot_id},
          {"metrics", to_json(r.metrics)},
          {"evaluated_at", r.evaluated_at}};
}

Json to_json(const SkipRecord& s) { return {{"snapshot_id", s.snapshot_id}, {"reason", s.reason}}; }

Json to_json(const GateVerdict& v) {
  Json snaps = Json::array();
  for (const auto& s : v.snapshots) {
    snaps.push_back({{"snapshot_id", s.snapshot_id},
                     {"candidate_rmse", s.candidate_rmse},
                     {"predecessor_rmse", opt(s.predecessor_rmse)},
                     {"threshold", s.threshold},
                     {"pass", s.pass}});
  }
  return {{"id", v.id},
          {"candidate", v.candidate},
          {"predecessor", opt(v.predecessor)},
          {"snapshots", snaps},
          {"overall", v.overall},
          {"epsilon", v.epsilon},
          {"created_at", v.created_at}};
}

GateVerdict gate_from_json(const Json& j) {
  GateVerdict v;
  v.id = j.at("id").get<std::string>();
  v.candidate = j.at("candidate").get<std::string>();
  if (!j.at("predecessor").is_null()) v.predecessor = j.at("predecessor").get<std::string>();
  for (const auto& s : j.at("snapshots")) {
    SnapshotVerdict sv;
    sv.snapshot_id = s.at("snapshot_id").get<std::string>();
    sv.candidate_rmse = s.at("candidate_rmse").get<double>();
    if (!s.at("predecessor_rmse").is_null()) sv.predecessor_rmse = s.at("predecessor_rmse").get<double>();
    sv.threshold = s.at("threshold").get<double>();
    sv.pass = s.at("pass").get<bool>();
    v.snapshots.push_back(std::move(sv));
  }
  v.overall = j.at("overall").get<bool>();
  v.epsilon = j.at("epsilon").get<double>();
  v.created_at = j.at("created_at").get<std::string>();
  return v;
}

Json to_json(const DeploymentRecord& d) {
  return {{"id", d.id},
          {"model_id", d.model_id},
          {"bundle", to_json(d.bundle)},
          {"target", d.target},
          {"deployed_at", d.deployed_at},
          {"active", d.active},
          {"drift_delta", d.drift_delta},
          {"drift_lambda", d.drift_lambda},
          {"auto_tune", d.auto_tune},
          {"auto_deploy", d.auto_deploy},
          {"gate_id", d.gate_id}};
}

Json to_json(const AgentCommand& c) {
  return {{"action", c.action},
          {"deployment_id", opt(c.deployment_id)},
          {"model_id", opt(c.model_id)},
          {"bundle", c.bundle ? to_json(*c.bundle) : Json()}};
}

Json to_json(const DriftState& s) {
  return {{"deployment_id", s.deployment_id},
          {"epoch", s.epoch},
          {"delta", s.params.delta},
          {"lambda", s.params.lambda},
          {"n", s.ph.n},
          {"mean", s.ph.mean},
          {"ph_m", s.ph.ph_m},
          {"ph_min", s.ph.ph_min},
          {"alarm", s.ph.alarm},
          {"alarm_at", opt(s.ph.alarm_at)},
          {"last_seq", s.last_seq}};
}

Json to_json(const FeedbackEvent& e) {
  Json features = Json::object();
  for (const auto& [k, v] : e.features) features[k] = v;
  return {{"deployment_id", e.deployment_id},
          {"epoch", e.epoch},
          {"seq", e.seq},
          {"features", features},
          {"prediction", e.prediction},
          {"observation", e.observation},
          {"ts", e.ts}};
}

FeedbackEvent feedback_from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorCode::validation, "feedback record must be a JSON object");
  FeedbackEvent e;
  if (!j.contains("seq") || !j["seq"].is_number_unsigned()) {
    fail(ErrorCode::validation, "feedback: seq must be a positive integer", Json{{"field", "seq"}});
  }
  e.seq = j["seq"].get<std::uint64_t>();
  const Json features = required<Json>(j, "features", "feedback");
  if (!features.is_object()) fail(ErrorCode::validation, "feedback: features must be an object", Json{{"field", "features"}});
  for (const auto& [k, v] : features.items()) {
    if (!v.is_number()) fail(ErrorCode::validation, "feedback: feature " + k + " is not a number", Json{{"field", k}});
    e.features[k] = v.get<double>();
  }
  for (const char* key : {"prediction", "observation"}) {
    if (!j.contains(key) || !j[key].is_number()) {
      fail(ErrorCode::validation, std::string("feedback: ") + key + " must be a number", Json{{"field", key}});
    }
  }
  e.prediction = j["prediction"].get<double>();
  e.observation = j["observation"].get<double>();
  if (!j.contains("ts") || !j["ts"].is_number_integer()) {
    fail(ErrorCode::validation, "feedback: ts must be an integer", Json{{"field", "ts"}});
  }
  e.ts = j["ts"].get<std::int64_t>();
  if (j.contains("deployment_id") && j["deployment_id"].is_string()) e.deployment_id = j["deployment_id"].get<std::string>();
  return e;
}

Json to_json(const TuningJob& j) {
  return {{"id", j.id},
          {"trigger", to_string(j.trigger)},
          {"trigger_key", j.trigger_key},
          {"source_model", j.source_model},
          {"target_snapshot", opt(j.target_snapshot)},
          {"deployment_id", opt(j.deployment_id)},
          {"lambda", j.lambda},
          {"tau", j.tau},
          {"status", to_string(j.status)},
          {"result_model", opt(j.result_model)},
          {"gate_id", opt(j.gate_id)},
          {"gate_pass", opt(j.gate_pass)},
          {"reason", opt(j.reason)},
          {"ready_at_seq", opt(j.ready_at_seq)},
          {"created_at", j.created_at}};
}

Json to_json(const Notification& n) {
  return {{"id", n.id}, {"job_id", n.job_id}, {"kind", n.kind}, {"message", n.message}, {"created_at", n.created_at}};
}

Json to_json(const AuditReport& a) { return {{"ok", a.ok()}, {"violations", a.violations}}; }

Json parse_object(std::string_view body) {
  Json j = Json::parse(body, nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::validation, "request body is not valid JSON");
  if (!j.is_object()) fail(ErrorCode::validation, "request body must be a JSON object");
  return j;
}

std::string dump_line(const Json& j) {
  return j.dump(-1, ' ', false, Json::error_handler_t::replace) + "\n";
}

}  // namespace mmgr

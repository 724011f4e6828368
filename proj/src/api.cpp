#include "mmgr/api.hpp"

#include "mmgr/bundle.hpp"
#include "mmgr/json_io.hpp"
#include "mmgr/linear_model.hpp"
#include "mmgr/sha256.hpp"
#include "mmgr/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <new>
#include <set>

namespace mmgr {

namespace {

/// Request fields gathered from path, query and body and checked against
/// the op's field list.
class Args {
 public:
  Args(const OpSpec& op, const ApiRequest& req) : op_(op) {
    bool has_body_fields = false;
    std::set<std::string> known_query;
    for (const auto& f : op.fields) {
      if (f.location == FieldLocation::body) has_body_fields = true;
      if (f.location == FieldLocation::query) known_query.insert(std::string(f.name));
    }
    for (const auto& [k, _] : req.query) {
      if (!known_query.count(k)) fail(ErrorCode::validation, "unknown query parameter: " + k, Json{{"field", k}});
    }
    Json body = Json::object();
    if (has_body_fields) {
      const bool blank = req.body.find_first_not_of(" \t\r\n") == std::string::npos;
      if (!blank) body = parse_object(req.body);
      for (const auto& [k, _] : body.items()) {
        const bool known = std::any_of(op.fields.begin(), op.fields.end(), [&](const OpField& f) {
          return f.location == FieldLocation::body && f.name == k;
        });
        if (!known) fail(ErrorCode::validation, "unknown field: " + k, Json{{"field", k}});
      }
    }
    for (const auto& f : op.fields) {
      const std::string name(f.name);
      switch (f.location) {
        case FieldLocation::path: {
          auto it = req.params.find(name);
          if (it != req.params.end() && !it->second.empty()) values_[name] = it->second;
          break;
        }
        case FieldLocation::query: {
          auto it = req.query.find(name);
          if (it != req.query.end()) values_[name] = from_text(f, it->second);
          break;
        }
        case FieldLocation::body:
          if (body.contains(name) && !body[name].is_null()) {
            check_type(f, body[name]);
            values_[name] = body[name];
          }
          break;
        case FieldLocation::raw_body:
          values_[name] = req.body;
          break;
      }
      if (f.required && !values_.contains(name)) {
        fail(ErrorCode::validation, "missing required field: " + name, Json{{"field", name}});
      }
    }
  }

  bool has(const char* k) const { return values_.contains(k); }
  std::string str(const char* k) const { return values_.at(k).get<std::string>(); }
  std::optional<std::string> opt_str(const char* k) const {
    return has(k) ? std::optional(str(k)) : std::nullopt;
  }
  double num(const char* k, double fallback) const { return has(k) ? values_.at(k).get<double>() : fallback; }
  std::optional<double> opt_num(const char* k) const {
    return has(k) ? std::optional(values_.at(k).get<double>()) : std::nullopt;
  }
  std::optional<std::uint64_t> opt_uint(const char* k) const {
    if (!has(k)) return std::nullopt;
    const Json& v = values_.at(k);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
      if (!v.is_number_unsigned()) fail(ErrorCode::validation, std::string(k) + " must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }
  bool flag(const char* k, bool fallback) const { return has(k) ? values_.at(k).get<bool>() : fallback; }
  const Json& json(const char* k) const { return values_.at(k); }
  std::vector<std::string> list(const char* k) const { return values_.at(k).get<std::vector<std::string>>(); }

 private:
  static Json from_text(const OpField& f, const std::string& text) {
    switch (f.type) {
      case FieldType::integer: {
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc() || p != text.data() + text.size()) bad(f, "an integer");
        return v;
      }
      case FieldType::number: {
        double v = 0;
        if (!parse_decimal(text, v)) bad(f, "a number");
        return v;
      }
      case FieldType::boolean:
        if (text == "true") return true;
        if (text == "false") return false;
        bad(f, "true or false");
      default:
        return text;
    }
  }

  static void check_type(const OpField& f, const Json& v) {
    switch (f.type) {
      case FieldType::string:
        if (!v.is_string()) bad(f, "a string");
        break;
      case FieldType::number:
        if (!v.is_number()) bad(f, "a number");
        break;
      case FieldType::integer:
        if (!v.is_number_integer()) bad(f, "an integer");
        break;
      case FieldType::boolean:
        if (!v.is_boolean()) bad(f, "a boolean");
        break;
      case FieldType::list:
        if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_string(); })) {
          bad(f, "a list of strings");
        }
        break;
      case FieldType::json:
        break;
    }
  }

  [[noreturn]] static void bad(const OpField& f, const char* expected) {
    fail(ErrorCode::validation, std::string(f.name) + " must be " + expected, Json{{"field", f.name}});
  }

  const OpSpec& op_;
  Json values_ = Json::object();
};

ApiResponse json_response(const Json& j) { return {200, "application/json", j.dump(-1, ' ', false, Json::error_handler_t::replace)}; }

template <class T>
Json json_list(const std::vector<T>& items) {
  Json out = Json::array();
  for (const auto& i : items) out.push_back(to_json(i));
  return out;
}

std::vector<double> number_array(const Json& j, const char* name) {
  if (!j.is_array()) fail(ErrorCode::validation, std::string(name) + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) fail(ErrorCode::validation, std::string(name) + " must be an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

PageHinkleyState ph_state_from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorCode::validation, "state must be an object");
  PageHinkleyState s;
  try {
    s.n = j.value("n", std::uint64_t{0});
    s.mean = j.value("mean", 0.0);
    s.ph_m = j.value("ph_m", 0.0);
    s.ph_min = j.value("ph_min", 0.0);
    s.alarm = j.value("alarm", false);
    if (j.contains("alarm_at") && !j["alarm_at"].is_null()) s.alarm_at = j["alarm_at"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::validation, "state has a mistyped field");
  }
  return s;
}

Json ph_state_to_json(const PageHinkleyState& s) {
  return {{"n", s.n},
          {"mean", s.mean},
          {"ph_m", s.ph_m},
          {"ph_min", s.ph_min},
          {"alarm", s.alarm},
          {"alarm_at", s.alarm_at ? Json(*s.alarm_at) : Json()}};
}

}  // namespace

ApiResponse ApiDispatcher::error_response(ErrorCode code, const std::string& message, const Json& detail) {
  Json body = {{"error", {{"code", to_string(code)}, {"message", message}, {"detail", detail}}}};
  return {http_status(code), "application/json", body.dump(-1, ' ', false, Json::error_handler_t::replace)};
}

ApiResponse ApiDispatcher::dispatch(std::string_view op_name, const ApiRequest& request) noexcept {
  try {
    const OpSpec* op = find_op(op_name);
    if (!op) return error_response(ErrorCode::not_found, "no such operation: " + std::string(op_name));
    return handle(*op, request);
  } catch (const Error& e) {
    return error_response(e.code(), e.what(), e.detail());
  } catch (const nlohmann::json::exception& e) {
    return error_response(ErrorCode::validation, std::string("malformed JSON value: ") + e.what());
  } catch (const std::bad_alloc&) {
    return error_response(ErrorCode::validation, "request too large");
  } catch (const std::exception& e) {
    ++unmapped_;
    return error_response(ErrorCode::corruption, std::string("internal error: ") + e.what());
  } catch (...) {
    ++unmapped_;
    return error_response(ErrorCode::corruption, "internal error");
  }
}

ApiResponse ApiDispatcher::handle(const OpSpec& op, const ApiRequest& request) {
  const Args a(op, request);
  Service& s = service_;
  const std::string_view n = op.name;

  // artifact-store
  if (n == "dataset.create") return json_response(to_json(s.artifacts().create_dataset(a.str("name"), a.opt_str("description").value_or(""))));
  if (n == "dataset.list") return json_response(json_list(s.artifacts().list_datasets()));
  if (n == "dataset.get") return json_response(to_json(s.artifacts().get_dataset(a.str("id"))));
  if (n == "dataset.delete") {
    s.artifacts().delete_dataset(a.str("id"));
    return json_response({{"deleted", a.str("id")}});
  }
  if (n == "snapshot.ingest") {
    return json_response(to_json(s.artifacts().ingest_snapshot(a.str("dataset"), a.str("file"), a.opt_str("parent"))));
  }
  if (n == "snapshot.get") return json_response(to_json(s.artifacts().get_snapshot(a.str("id"))));
  if (n == "snapshot.data") return {200, "text/csv", to_csv(s.artifacts().materialize(a.str("id")))};
  if (n == "blob.put") return json_response(to_json(s.artifacts().put_blob(a.str("file"))));
  if (n == "blob.get") {
    if (!is_sha256_hex(a.str("hash"))) fail(ErrorCode::validation, "hash must be 64 lowercase hex characters");
    return {200, "application/octet-stream", s.artifacts().get_blob(a.str("hash"))};
  }

  // lineage-graph
  if (n == "link.add") {
    return json_response(to_json(s.lineage().add_link(a.str("from"), a.str("to"), parse_link_kind(a.str("kind")),
                                                      a.opt_str("annotation"))));
  }
  if (n == "link.remove") {
    s.lineage().remove_link(a.str("from"), a.str("to"), parse_link_kind(a.str("kind")));
    return json_response({{"removed", {{"from", a.str("from")}, {"to", a.str("to")}, {"kind", a.str("kind")}}}});
  }
  if (n == "link.connected") {
    std::optional<unsigned> depth;
    if (a.has("depth")) {
      const auto d = a.json("depth").get<std::int64_t>();
      if (d < 1 || d > 1'000'000) fail(ErrorCode::validation, "depth must be a positive integer", Json{{"field", "depth"}});
      depth = static_cast<unsigned>(d);
    }
    return json_response(Json(s.lineage().connected(a.str("id"), parse_link_kind(a.str("kind")), depth)));
  }
  if (n == "link.list") return json_response(json_list(s.lineage().edges()));

  // registry-core
  if (n == "run.record") {
    RunSpec spec;
    spec.model_name = a.str("model_name");
    spec.algorithm = a.str("algorithm");
    spec.hyperparameters = a.str("hyperparameters");
    if (a.has("framework")) {
      const Json& fw = a.json("framework");
      if (!fw.is_object()) fail(ErrorCode::validation, "framework must be an object");
      spec.framework.name = fw.value("name", "");
      spec.framework.version = fw.value("version", "");
      if (fw.contains("extra")) spec.framework.extra = nlohmann::json::parse(fw["extra"].dump());
    }
    spec.input_snapshot = a.str("input_snapshot");
    spec.train_fraction = a.num("train_fraction", 1.0);
    spec.seed = a.opt_uint("seed").value_or(0);
    spec.started_at = a.opt_str("started_at").value_or("");
    spec.finished_at = a.opt_str("finished_at").value_or("");
    if (a.has("input_schema")) spec.input_schema = schema_from_json(a.json("input_schema"));
    const std::string hash = a.str("artifact");
    if (!is_sha256_hex(hash)) fail(ErrorCode::validation, "artifact must be a sha-256 hex hash");
    BlobRef ref{hash, 0};
    if (s.store().blobs().contains(hash)) ref.size = s.store().blobs().get(hash).size();
    auto [run, model] = s.registry().record_training_run(spec, ref);
    return json_response({{"run", to_json(run)}, {"model", to_json(model)}});
  }
  if (n == "run.get") return json_response(to_json(s.registry().get_run(a.str("id"))));
  if (n == "model.train") {
    TrainRequest r;
    r.model_name = a.str("name");
    r.snapshot_id = a.str("snapshot");
    r.features = a.list("features");
    r.target = a.str("target");
    r.lambda = a.num("lambda", 0.0);
    r.seed = a.opt_uint("seed").value_or(0);
    r.train_fraction = a.num("train_fraction", 1.0);
    auto [run, model] = s.train(r);
    return json_response({{"run", to_json(run)}, {"model", to_json(model)}});
  }
  if (n == "model.list") return json_response(json_list(s.registry().list_models(a.opt_str("name"))));
  if (n == "model.get") return json_response(to_json(s.registry().get_model(a.str("id"))));
  if (n == "model.history") {
    Json out = Json::array();
    for (const auto& m : s.registry().history(a.str("name"))) {
      const auto gate = s.registry().latest_gate(m.id);
      out.push_back({{"model", to_json(m)},
                     {"run", to_json(s.registry().get_run(m.created_by_run))},
                     {"gate", gate ? to_json(*gate) : Json()}});
    }
    return json_response(out);
  }
  if (n == "model.status") {
    return json_response(to_json(s.transition_status(a.str("id"), parse_model_status(a.str("status")))));
  }
  if (n == "model.reproduce") {
    const ModelRecord m = s.registry().get_model(a.str("id"));
    const BlobRef again = s.registry().reproduce_run(m.created_by_run);
    return json_response({{"model_id", m.id},
                          {"run_id", m.created_by_run},
                          {"original", to_json(m.artifact)},
                          {"reproduced", to_json(again)},
                          {"identical", again == m.artifact}});
  }
  if (n == "model.predict") {
    const ModelRecord m = s.registry().get_model(a.str("id"));
    const LinearModel model = deserialize(s.store().blobs().get(m.artifact.hash));
    const Json& rows = a.json("rows");
    if (!rows.is_array()) fail(ErrorCode::validation, "rows must be an array of objects");
    Json out = Json::array();
    for (const auto& row : rows) {
      if (!row.is_object()) fail(ErrorCode::validation, "rows must be an array of objects");
      std::map<std::string, double> values;
      for (const auto& [k, v] : row.items()) {
        if (!v.is_number()) fail(ErrorCode::validation, "feature " + k + " is not a number");
        values[k] = v.get<double>();
      }
      out.push_back(predict(model, values));
    }
    return json_response({{"model_id", m.id}, {"predictions", out}});
  }
  if (n == "model.tune") {
    auto [run, model] = s.tune(a.str("id"), a.str("snapshot"), a.num("lambda", 0.0), a.num("tau", 1.0),
                               a.opt_str("name").value_or(""));
    return json_response({{"run", to_json(run)}, {"model", to_json(model)}});
  }

  // eval-engine
  if (n == "model.evaluate") return json_response(to_json(s.eval().evaluate(a.str("id"), a.str("snapshot"))));
  if (n == "model.auto-evaluate") {
    const auto r = s.eval().auto_evaluate(a.str("id"));
    return json_response({{"reports", json_list(r.reports)}, {"skipped", json_list(r.skipped)}});
  }
  if (n == "model.gate") return json_response(to_json(s.eval().gate(a.str("id"))));
  if (n == "model.evaluations") return json_response(json_list(s.registry().evaluations(a.str("id"))));
  if (n == "metrics.compute") {
    const auto y = number_array(a.json("y"), "y");
    const auto y_hat = number_array(a.json("y_hat"), "y_hat");
    return json_response(to_json(compute_metrics(y, y_hat)));
  }

  // drift-monitor
  if (n == "feedback.ingest") {
    const std::string dep = a.str("id");
    const std::string text = a.str("file");
    std::size_t accepted = 0, line_no = 0, pos = 0;
    std::optional<DriftState> last;
    while (pos < text.size()) {
      auto end = text.find('\n', pos);
      if (end == std::string::npos) end = text.size();
      std::string_view line(text.data() + pos, end - pos);
      pos = end + 1;
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
      try {
        const Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded()) fail(ErrorCode::validation, "line is not valid JSON");
        FeedbackEvent e = feedback_from_json(j);
        if (!e.deployment_id.empty() && e.deployment_id != dep) {
          fail(ErrorCode::validation, "record names deployment " + e.deployment_id);
        }
        e.deployment_id = dep;
        last = s.ingest_feedback(e);
        ++accepted;
      } catch (const Error& e) {
        Json detail = e.detail().is_object() ? e.detail() : Json::object();
        detail["line"] = line_no;
        detail["accepted"] = accepted;
        throw Error(e.code(), "feedback line " + std::to_string(line_no) + ": " + e.what(), detail);
      }
    }
    if (accepted == 0) fail(ErrorCode::validation, "no feedback records in body");
    return json_response({{"accepted", accepted}, {"state", to_json(*last)}});
  }
  if (n == "feedback.list" || n == "feedback.snapshot") {
    FeedbackRange range{a.opt_uint("first"), a.opt_uint("last"), a.opt_uint("last_n")};
    if (n == "feedback.snapshot") return json_response(to_json(s.drift().feedback_to_snapshot(a.str("id"), range)));
    std::string out;
    for (const auto& e : s.drift().events(a.str("id"), range)) out += dump_line(to_json(e));
    return {200, "application/x-ndjson", out};
  }
  if (n == "drift.get") return json_response(to_json(s.drift().state(a.str("id"))));
  if (n == "drift.reset") return json_response(to_json(s.drift().reset_drift(a.str("id"))));
  if (n == "drift.step") {
    const PageHinkleyParams params{a.num("delta", 0.0), a.num("lambda", 0.0)};
    if (!(params.delta >= 0.0) || !(params.lambda >= 0.0) || !std::isfinite(params.delta) ||
        !std::isfinite(params.lambda)) {
      fail(ErrorCode::validation, "delta and lambda must be finite and >= 0");
    }
    const double e = a.num("residual", 0.0);
    if (!(e >= 0.0) || !std::isfinite(e)) fail(ErrorCode::validation, "residual must be a finite magnitude >= 0");
    const PageHinkleyState state = a.has("state") ? ph_state_from_json(a.json("state")) : PageHinkleyState{};
    return json_response(ph_state_to_json(page_hinkley_update(state, e, params)));
  }

  // tuning-orchestrator
  if (n == "job.list") return json_response(json_list(s.jobs().list()));
  if (n == "job.get") return json_response(to_json(s.jobs().get(a.str("id"))));
  if (n == "job.create") {
    const TuningJob job = s.jobs().create_manual(a.str("model"), a.str("snapshot"), a.opt_num("lambda"), a.opt_num("tau"));
    s.jobs().pump();
    return json_response(to_json(s.jobs().get(job.id)));
  }
  if (n == "job.run") return json_response(to_json(s.jobs().run_job(a.str("id"))));
  if (n == "job.cancel") return json_response(to_json(s.jobs().cancel(a.str("id"))));
  if (n == "job.alarm") {
    const auto at = a.opt_uint("alarm_at").value_or(0);
    if (at == 0) fail(ErrorCode::validation, "alarm_at must be positive");
    const DriftState st = s.drift().state(a.str("id"));
    const TuningJob job = s.jobs().on_drift_alarm(a.str("id"), st.epoch, at);
    s.jobs().pump();
    return json_response(to_json(s.jobs().get(job.id)));
  }
  if (n == "job.fan-out") {
    const auto jobs = s.jobs().on_new_base_model(a.str("id"));
    s.jobs().pump();
    Json out = Json::array();
    for (const auto& j : jobs) out.push_back(to_json(s.jobs().get(j.id)));
    return json_response(out);
  }
  if (n == "notification.list") return json_response(json_list(s.jobs().notifications()));

  // deploy-bundler
  if (n == "model.bundle") {
    const BlobRef ref = s.deployer().build_bundle(a.str("id"));
    return json_response({{"model_id", a.str("id")}, {"bundle", to_json(ref)}});
  }
  if (n == "bundle.verify") {
    const BundleManifest m = verify_bundle(a.str("file"));
    return json_response(Json::parse(encode_manifest(m)));
  }
  if (n == "deployment.create") {
    DeployOptions opt;
    opt.drift_delta = a.opt_num("drift_delta");
    opt.drift_lambda = a.opt_num("drift_lambda");
    opt.auto_tune = a.flag("auto_tune", true);
    opt.auto_deploy = a.flag("auto_deploy", true);
    return json_response(to_json(s.deployer().deploy(a.str("model"), a.str("target"), opt)));
  }
  if (n == "deployment.list") return json_response(json_list(s.registry().list_deployments()));
  if (n == "deployment.get") return json_response(to_json(s.registry().get_deployment(a.str("id"))));
  if (n == "deployment.command") return json_response(to_json(s.deployer().command_for(a.str("id"))));

  if (n == "registry.audit") return json_response(to_json(s.registry().audit()));
  if (n == "api.reference") return {200, "text/markdown", api_reference()};

  fail(ErrorCode::unsupported, "operation has no handler: " + std::string(n));
}

}  // namespace mmgr

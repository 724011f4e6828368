#include "mmgr/op_table.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace mmgr {

namespace {

using L = FieldLocation;
using T = FieldType;

std::vector<OpSpec> build() {
  std::vector<OpSpec> ops = {
      // artifact-store
      {"dataset.create", "dataset", "create", "POST", "/datasets", "artifact-store.create_dataset",
       "Create a dataset.",
       {{"name", L::body, T::string, true, "unique dataset name"},
        {"description", L::body, T::string, false, "free text"}},
       ResponseKind::json, {}},
      {"dataset.list", "dataset", "list", "GET", "/datasets", "artifact-store.list_datasets", "List datasets.", {},
       ResponseKind::json, {"id", "name", "snapshots"}},
      {"dataset.get", "dataset", "get", "GET", "/datasets/{id}", "artifact-store.get_dataset", "Show one dataset.",
       {{"id", L::path, T::string, true, "dataset id"}}, ResponseKind::json, {}},
      {"dataset.delete", "dataset", "delete", "DELETE", "/datasets/{id}", "artifact-store.delete_dataset",
       "Delete a dataset no model or other dataset depends on.", {{"id", L::path, T::string, true, "dataset id"}},
       ResponseKind::json, {}},
      {"snapshot.ingest", "snapshot", "ingest", "POST", "/datasets/{dataset}/snapshots",
       "artifact-store.ingest_snapshot", "Ingest a CSV file as a new immutable snapshot.",
       {{"dataset", L::path, T::string, true, "dataset id"},
        {"file", L::raw_body, T::string, true, "CSV file ('-' for stdin)"},
        {"parent", L::query, T::string, false, "snapshot this one derives from"}},
       ResponseKind::json, {}},
      {"snapshot.get", "snapshot", "get", "GET", "/snapshots/{id}", "artifact-store.get_snapshot",
       "Show snapshot metadata.", {{"id", L::path, T::string, true, "snapshot id"}}, ResponseKind::json, {}},
      {"snapshot.data", "snapshot", "data", "GET", "/snapshots/{id}/data", "artifact-store.materialize",
       "Materialize a snapshot as canonical CSV.", {{"id", L::path, T::string, true, "snapshot id"}},
       ResponseKind::text, {}},
      {"blob.put", "blob", "put", "POST", "/blobs", "artifact-store.put_blob", "Store raw bytes.",
       {{"file", L::raw_body, T::string, true, "file to upload ('-' for stdin)"}}, ResponseKind::json, {}},
      {"blob.get", "blob", "get", "GET", "/blobs/{hash}", "artifact-store.get_blob", "Fetch raw bytes by hash.",
       {{"hash", L::path, T::string, true, "sha-256 hex"}}, ResponseKind::binary, {}},

      // lineage-graph
      {"link.add", "link", "add", "POST", "/links", "lineage-graph.add_link", "Add a typed lineage edge.",
       {{"from", L::body, T::string, true, "source artifact id"},
        {"to", L::body, T::string, true, "target artifact id"},
        {"kind", L::body, T::string, true, "edge kind"},
        {"annotation", L::body, T::string, false, "free text"}},
       ResponseKind::json, {}},
      {"link.remove", "link", "remove", "DELETE", "/links", "lineage-graph.remove_link", "Remove a lineage edge.",
       {{"from", L::query, T::string, true, "source artifact id"},
        {"to", L::query, T::string, true, "target artifact id"},
        {"kind", L::query, T::string, true, "edge kind"}},
       ResponseKind::json, {}},
      {"link.connected", "link", "connected", "GET", "/artifacts/{id}/connected", "lineage-graph.connected",
       "Artifacts reachable over one edge kind.",
       {{"id", L::path, T::string, true, "start artifact id"},
        {"kind", L::query, T::string, true, "edge kind"},
        {"depth", L::query, T::integer, false, "hop limit (unbounded when omitted)"}},
       ResponseKind::json, {}},
      {"link.list", "link", "list", "GET", "/links", "lineage-graph.edges", "List every lineage edge.", {},
       ResponseKind::json, {"from", "kind", "to"}},

      // registry-core
      {"run.record", "run", "record", "POST", "/runs", "registry-core.record_training_run",
       "Record an externally executed training run and its model artifact.",
       {{"model_name", L::body, T::string, true, "model name"},
        {"algorithm", L::body, T::string, true, "algorithm identifier"},
        {"hyperparameters", L::body, T::string, true, "canonical JSON object text"},
        {"framework", L::body, T::json, false, "{name, version, extra}"},
        {"input_snapshot", L::body, T::string, true, "snapshot id"},
        {"artifact", L::body, T::string, true, "blob hash of the model artifact"},
        {"train_fraction", L::body, T::number, false, "fraction in (0, 1]"},
        {"seed", L::body, T::integer, false, "split seed"},
        {"started_at", L::body, T::string, false, "timestamp"},
        {"finished_at", L::body, T::string, false, "timestamp"},
        {"input_schema", L::body, T::json, false, "{features, target} for non built-in artifacts"}},
       ResponseKind::json, {}},
      {"run.get", "run", "get", "GET", "/runs/{id}", "registry-core.get_run", "Show one training run.",
       {{"id", L::path, T::string, true, "run id"}}, ResponseKind::json, {}},
      {"model.train", "model", "train", "POST", "/train", "model-runtime.fit",
       "Fit a built-in linear model on a snapshot and register it.",
       {{"name", L::body, T::string, true, "model name"},
        {"snapshot", L::body, T::string, true, "training snapshot id"},
        {"features", L::body, T::list, true, "feature columns"},
        {"target", L::body, T::string, true, "target column"},
        {"lambda", L::body, T::number, false, "ridge penalty (default 0)"},
        {"seed", L::body, T::integer, false, "split seed (default 0)"},
        {"train_fraction", L::body, T::number, false, "fraction in (0, 1] (default 1)"}},
       ResponseKind::json, {}},
      {"model.list", "model", "list", "GET", "/models", "registry-core.list_models", "List models.",
       {{"name", L::query, T::string, false, "only this name"}}, ResponseKind::json,
       {"id", "name", "version", "status"}},
      {"model.get", "model", "get", "GET", "/models/{id}", "registry-core.get_model", "Show one model.",
       {{"id", L::path, T::string, true, "model id"}}, ResponseKind::json, {}},
      {"model.history", "model", "history", "GET", "/model-history/{name}", "registry-core.history",
       "Every version of a model name with its run and latest gate verdict.",
       {{"name", L::path, T::string, true, "model name"}}, ResponseKind::json, {}},
      {"model.status", "model", "status", "POST", "/models/{id}/status", "registry-core.transition_status",
       "Move a model through candidate, validated, deployed, retired.",
       {{"id", L::path, T::string, true, "model id"},
        {"status", L::body, T::string, true, "validated, deployed or retired"}},
       ResponseKind::json, {}},
      {"model.reproduce", "model", "reproduce", "POST", "/models/{id}/reproduce", "registry-core.reproduce_run",
       "Re-execute the model's training run and compare artifacts.", {{"id", L::path, T::string, true, "model id"}},
       ResponseKind::json, {}},
      {"model.predict", "model", "predict", "POST", "/models/{id}/predict", "model-runtime.predict",
       "Predict rows with a built-in model.",
       {{"id", L::path, T::string, true, "model id"},
        {"rows", L::body, T::json, true, "array of {feature: value} objects"}},
       ResponseKind::json, {}},
      {"model.tune", "model", "tune", "POST", "/models/{id}/tune", "model-runtime.tune",
       "Proximal refit of a model on a snapshot, registered as its next version.",
       {{"id", L::path, T::string, true, "base model id"},
        {"snapshot", L::body, T::string, true, "snapshot id"},
        {"lambda", L::body, T::number, false, "ridge penalty (default 0)"},
        {"tau", L::body, T::number, false, "shrink towards the base (default 1)"},
        {"name", L::body, T::string, false, "model name (default: the base's name)"}},
       ResponseKind::json, {}},

      // eval-engine
      {"model.evaluate", "model", "evaluate", "POST", "/models/{id}/evaluate", "eval-engine.evaluate",
       "Evaluate a model on one snapshot.",
       {{"id", L::path, T::string, true, "model id"}, {"snapshot", L::body, T::string, true, "snapshot id"}},
       ResponseKind::json, {}},
      {"model.auto-evaluate", "model", "auto-evaluate", "POST", "/models/{id}/auto-evaluate",
       "eval-engine.auto_evaluate", "Evaluate on every connected snapshot.",
       {{"id", L::path, T::string, true, "model id"}}, ResponseKind::json, {}},
      {"model.gate", "model", "gate", "POST", "/models/{id}/gate", "eval-engine.gate",
       "Compare with the predecessor and record a gate verdict.", {{"id", L::path, T::string, true, "model id"}},
       ResponseKind::json, {}},
      {"model.evaluations", "model", "evaluations", "GET", "/models/{id}/evaluations", "eval-engine.evaluations",
       "Stored evaluation reports of a model.", {{"id", L::path, T::string, true, "model id"}},
       ResponseKind::json, {"snapshot_id", "metrics"}},
      {"metrics.compute", "metrics", "compute", "POST", "/metrics", "eval-engine.compute_metrics",
       "rmse, mae and r2 of two equal-length vectors.",
       {{"y", L::body, T::json, true, "observations"}, {"y_hat", L::body, T::json, true, "predictions"}},
       ResponseKind::json, {}},

      // drift-monitor
      {"feedback.ingest", "feedback", "ingest", "POST", "/deployments/{id}/feedback", "drift-monitor.ingest_feedback",
       "Append JSON-lines feedback events, in seq order.",
       {{"id", L::path, T::string, true, "deployment id"},
        {"file", L::raw_body, T::string, true, "JSONL file ('-' for stdin)"}},
       ResponseKind::json, {}},
      {"feedback.list", "feedback", "list", "GET", "/deployments/{id}/feedback", "drift-monitor.events",
       "Feedback events of the current epoch.",
       {{"id", L::path, T::string, true, "deployment id"},
        {"first", L::query, T::integer, false, "first seq"},
        {"last", L::query, T::integer, false, "last seq"},
        {"last_n", L::query, T::integer, false, "trailing count"}},
       ResponseKind::jsonl, {}},
      {"feedback.snapshot", "feedback", "snapshot", "POST", "/deployments/{id}/feedback-snapshot",
       "drift-monitor.feedback_to_snapshot", "Materialize feedback as a snapshot.",
       {{"id", L::path, T::string, true, "deployment id"},
        {"first", L::body, T::integer, false, "first seq"},
        {"last", L::body, T::integer, false, "last seq"},
        {"last_n", L::body, T::integer, false, "trailing count"}},
       ResponseKind::json, {}},
      {"drift.get", "drift", "get", "GET", "/deployments/{id}/drift", "drift-monitor.state",
       "Current Page-Hinkley state.", {{"id", L::path, T::string, true, "deployment id"}}, ResponseKind::json, {}},
      {"drift.reset", "drift", "reset", "POST", "/deployments/{id}/drift/reset", "drift-monitor.reset_drift",
       "Start a new drift epoch.", {{"id", L::path, T::string, true, "deployment id"}}, ResponseKind::json, {}},
      {"drift.step", "drift", "step", "POST", "/page-hinkley", "drift-monitor.page_hinkley_update",
       "One stateless Page-Hinkley update.",
       {{"residual", L::body, T::number, true, "absolute residual, at least 0"},
        {"delta", L::body, T::number, true, "tolerance"},
        {"lambda", L::body, T::number, true, "threshold"},
        {"state", L::body, T::json, false, "{n, mean, ph_m, ph_min, alarm, alarm_at}"}},
       ResponseKind::json, {}},

      // tuning-orchestrator
      {"job.list", "job", "list", "GET", "/jobs", "tuning-orchestrator.list", "List tuning jobs.", {},
       ResponseKind::json, {"id", "trigger", "status", "result_model"}},
      {"job.get", "job", "get", "GET", "/jobs/{id}", "tuning-orchestrator.get", "Show one job.",
       {{"id", L::path, T::string, true, "job id"}}, ResponseKind::json, {}},
      {"job.create", "job", "create", "POST", "/jobs", "tuning-orchestrator.create_manual",
       "Queue a manual tuning job.",
       {{"model", L::body, T::string, true, "base model id"},
        {"snapshot", L::body, T::string, true, "snapshot id"},
        {"lambda", L::body, T::number, false, "ridge penalty"},
        {"tau", L::body, T::number, false, "shrink strength"}},
       ResponseKind::json, {}},
      {"job.run", "job", "run", "POST", "/jobs/{id}/run", "tuning-orchestrator.run_job", "Execute a job now.",
       {{"id", L::path, T::string, true, "job id"}}, ResponseKind::json, {}},
      {"job.cancel", "job", "cancel", "POST", "/jobs/{id}/cancel", "tuning-orchestrator.cancel",
       "Cancel a job that has not finished.", {{"id", L::path, T::string, true, "job id"}}, ResponseKind::json, {}},
      {"job.alarm", "job", "alarm", "POST", "/deployments/{id}/alarm", "tuning-orchestrator.on_drift_alarm",
       "Raise a drift alarm by hand.",
       {{"id", L::path, T::string, true, "deployment id"},
        {"alarm_at", L::body, T::integer, true, "feedback seq the alarm refers to"}},
       ResponseKind::json, {}},
      {"job.fan-out", "job", "fan-out", "POST", "/models/{id}/fan-out", "tuning-orchestrator.on_new_base_model",
       "Queue tuning jobs for every dataset the model's data is base_of.",
       {{"id", L::path, T::string, true, "base model id"}}, ResponseKind::json, {"id", "target_snapshot", "status"}},
      {"notification.list", "notification", "list", "GET", "/notifications", "tuning-orchestrator.notifications",
       "Operator notifications.", {}, ResponseKind::json, {"id", "job_id", "kind", "message"}},

      // deploy-bundler
      {"model.bundle", "model", "bundle", "POST", "/models/{id}/bundle", "deploy-bundler.build_bundle",
       "Build the deployment bundle of a validated model.", {{"id", L::path, T::string, true, "model id"}},
       ResponseKind::json, {}},
      {"bundle.verify", "bundle", "verify", "POST", "/bundles/verify", "deploy-bundler.verify_bundle",
       "Verify a bundle archive and return its manifest.",
       {{"file", L::raw_body, T::string, true, "bundle archive ('-' for stdin)"}}, ResponseKind::json, {}},
      {"deployment.create", "deployment", "create", "POST", "/deployments", "deploy-bundler.deploy",
       "Deploy a validated model to a target.",
       {{"model", L::body, T::string, true, "model id"},
        {"target", L::body, T::string, true, "target name"},
        {"drift_delta", L::body, T::number, false, "Page-Hinkley tolerance override"},
        {"drift_lambda", L::body, T::number, false, "Page-Hinkley threshold override"},
        {"auto_tune", L::body, T::boolean, false, "tune on drift (default true)"},
        {"auto_deploy", L::body, T::boolean, false, "redeploy passing candidates (default true)"}},
       ResponseKind::json, {}},
      {"deployment.list", "deployment", "list", "GET", "/deployments", "registry-core.list_deployments",
       "List deployments.", {}, ResponseKind::json, {"id", "model_id", "target", "active"}},
      {"deployment.get", "deployment", "get", "GET", "/deployments/{id}", "registry-core.get_deployment",
       "Show one deployment.", {{"id", L::path, T::string, true, "deployment id"}}, ResponseKind::json, {}},
      {"deployment.command", "deployment", "command", "GET", "/deployments/{id}/command",
       "deploy-bundler.command_for", "What an agent on this deployment should do next.",
       {{"id", L::path, T::string, true, "deployment id"}}, ResponseKind::json, {}},

      // service-interface
      {"registry.audit", "registry", "audit", "GET", "/audit", "registry-core.audit",
       "Full-registry integrity audit.", {}, ResponseKind::json, {}},
      {"api.reference", "api", "reference", "GET", "/api", "service-interface.api_reference",
       "This reference, as Markdown.", {}, ResponseKind::text, {}},
  };
  return ops;
}

}  // namespace

const std::vector<OpSpec>& op_table() {
  static const std::vector<OpSpec> table = build();
  return table;
}

const OpSpec* find_op(std::string_view name) {
  for (const auto& op : op_table()) {
    if (op.name == name) return &op;
  }
  return nullptr;
}

const std::vector<std::string_view>& module_operations() {
  static const std::vector<std::string_view> ops = {
      "artifact-store.put_blob",
      "artifact-store.get_blob",
      "artifact-store.create_dataset",
      "artifact-store.list_datasets",
      "artifact-store.get_dataset",
      "artifact-store.delete_dataset",
      "artifact-store.ingest_snapshot",
      "artifact-store.get_snapshot",
      "artifact-store.materialize",
      "lineage-graph.add_link",
      "lineage-graph.remove_link",
      "lineage-graph.connected",
      "lineage-graph.edges",
      "registry-core.record_training_run",
      "registry-core.transition_status",
      "registry-core.reproduce_run",
      "registry-core.list_models",
      "registry-core.get_model",
      "registry-core.history",
      "registry-core.get_run",
      "registry-core.list_deployments",
      "registry-core.get_deployment",
      "registry-core.audit",
      "model-runtime.fit",
      "model-runtime.predict",
      "model-runtime.tune",
      "eval-engine.compute_metrics",
      "eval-engine.evaluate",
      "eval-engine.auto_evaluate",
      "eval-engine.gate",
      "eval-engine.evaluations",
      "drift-monitor.ingest_feedback",
      "drift-monitor.page_hinkley_update",
      "drift-monitor.reset_drift",
      "drift-monitor.feedback_to_snapshot",
      "drift-monitor.state",
      "drift-monitor.events",
      "tuning-orchestrator.on_drift_alarm",
      "tuning-orchestrator.on_new_base_model",
      "tuning-orchestrator.create_manual",
      "tuning-orchestrator.run_job",
      "tuning-orchestrator.cancel",
      "tuning-orchestrator.get",
      "tuning-orchestrator.list",
      "tuning-orchestrator.notifications",
      "deploy-bundler.build_bundle",
      "deploy-bundler.verify_bundle",
      "deploy-bundler.deploy",
      "deploy-bundler.command_for",
      "service-interface.api_reference",
  };
  return ops;
}

std::string_view to_string(FieldLocation l) {
  switch (l) {
    case FieldLocation::path: return "path";
    case FieldLocation::query: return "query";
    case FieldLocation::body: return "body";
    case FieldLocation::raw_body: return "raw body";
  }
  return "body";
}

std::string_view to_string(FieldType t) {
  switch (t) {
    case FieldType::string: return "string";
    case FieldType::number: return "number";
    case FieldType::integer: return "integer";
    case FieldType::boolean: return "boolean";
    case FieldType::json: return "json";
    case FieldType::list: return "list of strings";
  }
  return "string";
}

std::string api_reference() {
  std::ostringstream out;
  out << "# mmgr HTTP API\n\n"
      << "Generated from the operation table (`mmgr api reference` prints the same text).\n\n"
      << "Request and response bodies are compact JSON with a fixed field order. Errors use one envelope:\n\n"
      << "```json\n{\"error\":{\"code\":\"not_found\",\"message\":\"model not found: model-000009\","
         "\"detail\":{\"kind\":\"model\",\"id\":\"model-000009\"}}}\n```\n\n"
      << "| code | HTTP status |\n|---|---|\n"
      << "| not_found | 404 |\n| validation | 422 |\n| schema | 422 |\n| ordering | 422 |\n"
      << "| state | 409 |\n| cycle | 409 |\n| inconclusive | 409 |\n| corruption | 500 |\n| unsupported | 501 |\n\n"
      << "Every operation is also a CLI command: `mmgr <noun> <verb> [--field value ...]`.\n";
  std::string_view section;
  for (const auto& op : op_table()) {
    const auto module = op.module_op.substr(0, op.module_op.find('.'));
    if (module != section) {
      section = module;
      out << "\n## " << module << "\n";
    }
    out << "\n### `" << op.method << " " << op.path << "`\n\n"
        << op.summary << "\n\n"
        << "CLI: `mmgr " << op.noun << " " << op.verb << "`. Module operation: `" << op.module_op << "`.";
    switch (op.response) {
      case ResponseKind::jsonl: out << " Response: JSON lines."; break;
      case ResponseKind::text: out << " Response: text."; break;
      case ResponseKind::binary: out << " Response: raw bytes."; break;
      case ResponseKind::json: break;
    }
    out << "\n";
    if (!op.fields.empty()) {
      out << "\n| field | in | type | required | |\n|---|---|---|---|---|\n";
      for (const auto& f : op.fields) {
        out << "| " << f.name << " | " << to_string(f.location) << " | " << to_string(f.type) << " | "
            << (f.required ? "yes" : "no") << " | " << f.help << " |\n";
      }
    }
  }
  return out.str();
}

}  // namespace mmgr

#pragma once

#include "mmgr/artifact_store.hpp"
#include "mmgr/lineage.hpp"
#include "mmgr/metrics.hpp"
#include "mmgr/store.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mmgr {

enum class ModelStatus { candidate, validated, deployed, retired };

std::string_view to_string(ModelStatus s);
ModelStatus parse_model_status(std::string_view s);
/// candidate -> validated -> deployed -> retired; retire from anywhere.
bool is_legal_transition(ModelStatus from, ModelStatus to);

struct FrameworkMeta {
  std::string name;
  std::string version;
  nlohmann::json extra = nlohmann::json::object();
};

struct InputSchema {
  std::vector<std::string> features;
  std::string target;

  friend bool operator==(const InputSchema&, const InputSchema&) = default;
};

/// Everything a caller supplies to record one training run.
struct RunSpec {
  std::string model_name;
  std::string algorithm;
  std::string hyperparameters;  // canonical JSON object text
  FrameworkMeta framework;
  std::string input_snapshot;
  double train_fraction = 1.0;
  std::uint64_t seed = 0;
  std::string started_at;
  std::string finished_at;
  /// Required when the artifact is not a built-in model; otherwise derived
  /// from the artifact.
  std::optional<InputSchema> input_schema;
};

struct TrainingRun {
  std::string id;
  std::string algorithm;
  std::string hyperparameters;
  FrameworkMeta framework;
  std::string input_snapshot;
  double train_fraction = 1.0;
  std::uint64_t seed = 0;
  std::string started_at;
  std::string finished_at;
  std::string produced_model;
};

struct ModelRecord {
  std::string id;
  std::string name;
  std::int64_t version = 0;
  BlobRef artifact;
  InputSchema input_schema;
  std::string created_by_run;
  ModelStatus status = ModelStatus::candidate;
  std::optional<std::string> predecessor;
  std::string created_at;
};

struct DeploymentRecord {
  std::string id;
  std::string model_id;
  BlobRef bundle;
  std::string target;
  std::string deployed_at;
  bool active = false;
  double drift_delta = 0.0;
  double drift_lambda = 0.0;
  bool auto_tune = true;
  bool auto_deploy = true;
  std::string gate_id;  // the passing verdict that admitted this deployment
};

struct AuditReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// System of record for runs, models, evaluations, gate verdicts and
/// deployments.
class Registry {
 public:
  Registry(Store& store, ArtifactStore& artifacts, LineageGraph& lineage)
      : store_(store), artifacts_(artifacts), lineage_(lineage) {}

  /// Persists run and model atomically, assigns the next version for the
  /// name and links model -trained_on-> snapshot.
  std::pair<TrainingRun, ModelRecord> record_training_run(const RunSpec& spec,
                                                          const BlobRef& model_artifact);

  ModelRecord transition_status(std::string_view model_id, ModelStatus next);

  /// Re-executes a built-in run and stores the result; the returned ref
  /// equals the original artifact when the run is reproducible.
  BlobRef reproduce_run(std::string_view run_id);

  ModelRecord get_model(std::string_view id);
  std::vector<ModelRecord> list_models(const std::optional<std::string>& name = std::nullopt);
  std::vector<ModelRecord> history(std::string_view name);
  std::optional<ModelRecord> latest_version(std::string_view name);
  std::optional<ModelRecord> deployed_model(std::string_view name);
  TrainingRun get_run(std::string_view id);
  TrainingRun run_for_model(std::string_view model_id);

  // Evaluation persistence. Re-evaluating (model, snapshot) overwrites the
  // metrics but keeps the report id.
  EvaluationReport put_evaluation(std::string_view model_id, std::string_view snapshot_id,
                                  const Metrics& metrics);
  std::optional<EvaluationReport> find_evaluation(std::string_view model_id,
                                                  std::string_view snapshot_id);
  std::vector<EvaluationReport> evaluations(std::string_view model_id);

  GateVerdict put_gate(GateVerdict verdict);
  std::optional<GateVerdict> latest_gate(std::string_view model_id);
  GateVerdict get_gate(std::string_view gate_id);

  /// Inserts an active deployment, deactivating any other on `target`.
  DeploymentRecord insert_deployment(DeploymentRecord record);
  DeploymentRecord get_deployment(std::string_view id);
  std::vector<DeploymentRecord> list_deployments();
  std::optional<DeploymentRecord> active_deployment(std::string_view target);
  void deactivate_deployment(std::string_view id);

  /// Referential integrity, version monotonicity, single-deployed and
  /// deployment-safety checks across the whole registry.
  AuditReport audit();

  /// Digest over every model record; evaluation must leave it unchanged.
  std::string models_fingerprint();

 private:
  Store& store_;
  ArtifactStore& artifacts_;
  LineageGraph& lineage_;
};

}  // namespace mmgr

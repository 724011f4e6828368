#pragma once

#include "mmgr/artifact_store.hpp"
#include "mmgr/config.hpp"
#include "mmgr/deployer.hpp"
#include "mmgr/drift_monitor.hpp"
#include "mmgr/eval_engine.hpp"
#include "mmgr/lineage.hpp"
#include "mmgr/orchestrator.hpp"
#include "mmgr/registry.hpp"
#include "mmgr/store.hpp"

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace mmgr {

struct TrainRequest {
  std::string model_name;
  std::string snapshot_id;
  std::vector<std::string> features;
  std::string target;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  double train_fraction = 1.0;
};

/// The whole model-management service in one process: every module wired
/// to one store. Operations that cross modules (training, status changes
/// that trigger fan-out, feedback that triggers tuning) live here.
class Service {
 public:
  explicit Service(Config config, Clock clock = system_clock());
  ~Service();

  const Config& config() const { return config_; }
  Store& store() { return store_; }
  ArtifactStore& artifacts() { return artifacts_; }
  LineageGraph& lineage() { return lineage_; }
  Registry& registry() { return registry_; }
  EvalEngine& eval() { return eval_; }
  DriftMonitor& drift() { return drift_; }
  Deployer& deployer() { return deployer_; }
  Orchestrator& jobs() { return *jobs_; }

  /// Fits a built-in model, stores the artifact and records the run.
  std::pair<TrainingRun, ModelRecord> train(const TrainRequest& request);

  /// Proximal refit of `base_id` on a snapshot, recorded as the next
  /// version of `name` (the base's name when empty) with a tuned_from link.
  std::pair<TrainingRun, ModelRecord> tune(std::string_view base_id, std::string_view snapshot_id,
                                           double lambda, double tau, std::string_view name = "");

  /// Registry transition; a newly validated model whose training data has
  /// base_of links fans out tuning jobs.
  ModelRecord transition_status(std::string_view model_id, ModelStatus next);

  DriftState ingest_feedback(const FeedbackEvent& event);

 private:
  Config config_;
  Store store_;
  ArtifactStore artifacts_;
  LineageGraph lineage_;
  Registry registry_;
  EvalEngine eval_;
  DriftMonitor drift_;
  Deployer deployer_;
  std::unique_ptr<Orchestrator> jobs_;
};

}  // namespace mmgr

#pragma once

#include "mmgr/artifact_store.hpp"
#include "mmgr/lineage.hpp"
#include "mmgr/metrics.hpp"
#include "mmgr/registry.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace mmgr {

/// Evaluation and promotion gating.
class EvalEngine {
 public:
  EvalEngine(Store& store, ArtifactStore& artifacts, LineageGraph& lineage, Registry& registry,
             GateConfig config = {})
      : store_(store), artifacts_(artifacts), lineage_(lineage), registry_(registry),
        config_(config) {}

  const GateConfig& config() const { return config_; }

  /// Schema errors list the missing columns in detail["missing"].
  EvaluationReport evaluate(std::string_view model_id, std::string_view snapshot_id);

  /// Training snapshot first, then every snapshot reachable from it over
  /// compatible_with (either way) and newer_recording_of (backwards), by id.
  std::vector<std::string> evaluation_set(std::string_view model_id);

  AutoEvaluation auto_evaluate(std::string_view model_id);

  /// Compares the candidate with its predecessor (previous version of the
  /// same name) on the candidate's evaluation set and persists the verdict.
  GateVerdict gate(std::string_view candidate_id);

  /// RMSE of the model on the rows it was trained on.
  double train_rmse(std::string_view model_id);

 private:
  Store& store_;
  ArtifactStore& artifacts_;
  LineageGraph& lineage_;
  Registry& registry_;
  GateConfig config_;
};

}  // namespace mmgr

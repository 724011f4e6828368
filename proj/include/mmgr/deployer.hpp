#pragma once

#include "mmgr/artifact_store.hpp"
#include "mmgr/bundle.hpp"
#include "mmgr/drift_monitor.hpp"
#include "mmgr/lineage.hpp"
#include "mmgr/registry.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace mmgr {

struct DeployOptions {
  std::optional<double> drift_delta;   // absolute override
  std::optional<double> drift_lambda;  // absolute override
  bool auto_tune = true;
  bool auto_deploy = true;
};

/// What a polling agent should do next.
struct AgentCommand {
  std::string action;  // "none", "redeploy" or "stop"
  std::optional<std::string> deployment_id;
  std::optional<std::string> model_id;
  std::optional<BlobRef> bundle;
};

class Deployer {
 public:
  Deployer(Store& store, ArtifactStore& artifacts, LineageGraph& lineage, Registry& registry,
           DriftMonitor& drift, DriftDefaults drift_defaults = {})
      : store_(store), artifacts_(artifacts), lineage_(lineage), registry_(registry),
        drift_(drift), drift_defaults_(drift_defaults) {}

  /// Requires a validated (or already deployed) model. Deterministic: the
  /// same model and verdict always produce the same archive.
  BlobRef build_bundle(std::string_view model_id);

  /// Builds the bundle if needed, marks the model deployed (retiring the
  /// previously deployed version of its name), deactivates whatever was
  /// active on `target` and starts a fresh drift statistic.
  DeploymentRecord deploy(std::string_view model_id, std::string_view target,
                          const DeployOptions& options = {});

  AgentCommand command_for(std::string_view deployment_id);

 private:
  Store& store_;
  ArtifactStore& artifacts_;
  LineageGraph& lineage_;
  Registry& registry_;
  DriftMonitor& drift_;
  DriftDefaults drift_defaults_;
};

}  // namespace mmgr

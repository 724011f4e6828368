#include "mmgr/deployer.hpp"

#include "mmgr/error.hpp"
#include "mmgr/linear_model.hpp"

namespace mmgr {

BlobRef Deployer::build_bundle(std::string_view model_id) {
  auto& db = store_.db();
  Database::Transaction tx(db);
  const ModelRecord m = registry_.get_model(model_id);
  if (m.status != ModelStatus::validated && m.status != ModelStatus::deployed) {
    fail(ErrorCode::state, "only validated or deployed models can be bundled; " + m.id + " is " +
                               std::string(to_string(m.status)),
         Json{{"current", to_string(m.status)}});
  }
  const auto verdict = registry_.latest_gate(m.id);
  if (!verdict || !verdict->overall) {
    fail(ErrorCode::state, "model " + m.id + " has no passing gate verdict", Json{{"reason", "gate_required"}});
  }
  const std::string model_bytes = store_.blobs().get(m.artifact.hash);
  deserialize(model_bytes);

  BundleManifest manifest;
  manifest.model_id = m.id;
  manifest.input_schema = m.input_schema;
  manifest.created_at = m.created_at;
  nlohmann::json rmse = nlohmann::json::object();
  for (const auto& s : verdict->snapshots) rmse[s.snapshot_id] = s.candidate_rmse;
  manifest.metrics = {{"gate_id", verdict->id}, {"rmse", rmse}};

  const BlobRef ref = store_.blobs().put(build_bundle_archive(manifest, model_bytes));
  const std::string bundle_id = "bundle-" + ref.hash.substr(0, 12);
  if (!store_.artifact_exists(bundle_id)) {
    store_.register_artifact(bundle_id, "bundle");
    db.execute("INSERT INTO bundles(id, model_id, blob_hash, blob_size) VALUES(?, ?, ?, ?)", bundle_id, m.id, ref.hash,
               ref.size);
    lineage_.add_link(m.id, bundle_id, LinkKind::deployed_as);
  }
  tx.commit();
  return ref;
}

DeploymentRecord Deployer::deploy(std::string_view model_id, std::string_view target, const DeployOptions& options) {
  if (target.empty()) fail(ErrorCode::validation, "deployment target must not be empty");
  auto& db = store_.db();
  Database::Transaction tx(db);
  ModelRecord m = registry_.get_model(model_id);
  if (m.status == ModelStatus::validated) {
    m = registry_.transition_status(m.id, ModelStatus::deployed);
  } else if (m.status != ModelStatus::deployed) {
    fail(ErrorCode::state, "model " + m.id + " is " + std::string(to_string(m.status)) + " and cannot be deployed",
         Json{{"current", to_string(m.status)}, {"requested", "deployed"}});
  }
  const BlobRef bundle = build_bundle(m.id);
  const auto verdict = registry_.latest_gate(m.id);

  const LinearModel lm = deserialize(store_.blobs().get(m.artifact.hash));
  PageHinkleyParams params = default_drift_params(lm.train_residual_std, drift_defaults_);
  if (options.drift_delta) params.delta = *options.drift_delta;
  if (options.drift_lambda) params.lambda = *options.drift_lambda;

  const auto previous = registry_.active_deployment(target);
  DeploymentRecord d;
  d.model_id = m.id;
  d.bundle = bundle;
  d.target = std::string(target);
  d.drift_delta = params.delta;
  d.drift_lambda = params.lambda;
  d.auto_tune = options.auto_tune;
  d.auto_deploy = options.auto_deploy;
  d.gate_id = verdict->id;
  d = registry_.insert_deployment(d);
  drift_.init_deployment(d.id, params);
  if (previous) drift_.reset_drift(previous->id);
  tx.commit();
  return d;
}

AgentCommand Deployer::command_for(std::string_view deployment_id) {
  auto lk = store_.db().lock();
  const DeploymentRecord d = registry_.get_deployment(deployment_id);
  AgentCommand c;
  if (d.active) {
    c.action = "none";
    c.deployment_id = d.id;
    return c;
  }
  if (auto next = registry_.active_deployment(d.target)) {
    c.action = "redeploy";
    c.deployment_id = next->id;
    c.model_id = next->model_id;
    c.bundle = next->bundle;
    return c;
  }
  c.action = "stop";
  return c;
}

}  // namespace mmgr

#include "mmgr/service.hpp"

#include "mmgr/builtin.hpp"
#include "mmgr/linear_model.hpp"

namespace mmgr {

Service::Service(Config config, Clock clock)
    : config_(std::move(config)),
      store_(config_.data_dir, std::move(clock)),
      artifacts_(store_),
      lineage_(store_),
      registry_(store_, artifacts_, lineage_),
      eval_(store_, artifacts_, lineage_, registry_, config_.gate),
      drift_(store_, artifacts_, lineage_, registry_),
      deployer_(store_, artifacts_, lineage_, registry_, drift_, config_.drift),
      jobs_(std::make_unique<Orchestrator>(store_, artifacts_, lineage_, registry_, eval_, drift_, deployer_,
                                           config_.jobs)) {
  drift_.set_alarm_listener([this](const std::string& deployment, std::uint64_t epoch, std::uint64_t alarm_at) {
    jobs_->on_drift_alarm(deployment, epoch, alarm_at);
  });
}

Service::~Service() = default;

std::pair<TrainingRun, ModelRecord> Service::train(const TrainRequest& request) {
  Database::Transaction tx(store_.db());
  const std::string hp = ols_hyperparameters(request.features, request.target, request.lambda);
  const Table table = artifacts_.materialize(request.snapshot_id);
  const LinearModel model =
      run_builtin(kOlsAlgorithm, hp, table, request.train_fraction, request.seed, artifacts_);
  const BlobRef artifact = store_.blobs().put(serialize(model));

  RunSpec spec;
  spec.model_name = request.model_name;
  spec.algorithm = std::string(kOlsAlgorithm);
  spec.hyperparameters = hp;
  spec.framework = {std::string(kRuntimeName), std::string(kRuntimeVersion), nlohmann::json::object()};
  spec.input_snapshot = request.snapshot_id;
  spec.train_fraction = request.train_fraction;
  spec.seed = request.seed;
  auto result = registry_.record_training_run(spec, artifact);
  tx.commit();
  return result;
}

std::pair<TrainingRun, ModelRecord> Service::tune(std::string_view base_id, std::string_view snapshot_id,
                                                  double lambda, double tau, std::string_view name) {
  Database::Transaction tx(store_.db());
  const ModelRecord base = registry_.get_model(base_id);
  const std::string hp = tune_hyperparameters(base.artifact.hash, lambda, tau);
  const Table table = artifacts_.materialize(snapshot_id);
  const LinearModel model = run_builtin(kTuneAlgorithm, hp, table, 1.0, 0, artifacts_);
  const BlobRef artifact = store_.blobs().put(serialize(model));

  RunSpec spec;
  spec.model_name = name.empty() ? base.name : std::string(name);
  spec.algorithm = std::string(kTuneAlgorithm);
  spec.hyperparameters = hp;
  spec.framework = {std::string(kRuntimeName), std::string(kRuntimeVersion), nlohmann::json::object()};
  spec.input_snapshot = std::string(snapshot_id);
  auto result = registry_.record_training_run(spec, artifact);
  lineage_.add_link(result.second.id, base.id, LinkKind::tuned_from);
  tx.commit();
  return result;
}

ModelRecord Service::transition_status(std::string_view model_id, ModelStatus next) {
  ModelRecord m = registry_.transition_status(model_id, next);
  if (next == ModelStatus::validated) {
    jobs_->on_new_base_model(m.id);
    jobs_->pump();
  }
  return m;
}

DriftState Service::ingest_feedback(const FeedbackEvent& event) {
  DriftState s = drift_.ingest_feedback(event);
  jobs_->pump();
  return s;
}

}  // namespace mmgr

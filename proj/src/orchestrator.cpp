#include "mmgr/orchestrator.hpp"

#include "mmgr/builtin.hpp"
#include "mmgr/error.hpp"
#include "mmgr/linear_model.hpp"

#include <chrono>
#include <deque>
#include <set>

namespace mmgr {

std::string_view to_string(JobTrigger t) {
  switch (t) {
    case JobTrigger::drift_alarm: return "drift_alarm";
    case JobTrigger::new_base_model: return "new_base_model";
    case JobTrigger::manual: return "manual";
  }
  return "manual";
}

std::string_view to_string(JobStatus s) {
  switch (s) {
    case JobStatus::queued: return "queued";
    case JobStatus::running: return "running";
    case JobStatus::succeeded: return "succeeded";
    case JobStatus::failed: return "failed";
  }
  return "queued";
}

JobTrigger parse_job_trigger(std::string_view s) {
  for (auto t : {JobTrigger::drift_alarm, JobTrigger::new_base_model, JobTrigger::manual}) {
    if (to_string(t) == s) return t;
  }
  fail(ErrorCode::validation, "unknown job trigger: " + std::string(s));
}

namespace {

JobStatus parse_job_status(std::string_view s) {
  for (auto st : {JobStatus::queued, JobStatus::running, JobStatus::succeeded, JobStatus::failed}) {
    if (to_string(st) == s) return st;
  }
  fail(ErrorCode::corruption, "unknown job status in store: " + std::string(s));
}

constexpr const char* kJobColumns =
    "id, trigger, trigger_key, source_model, target_snapshot, deployment_id, lambda, tau, status, result_model, "
    "gate_id, gate_pass, reason, ready_at_seq, created_at";

TuningJob read_job(const Statement& st) {
  TuningJob j;
  j.id = st.text(0);
  j.trigger = parse_job_trigger(st.text(1));
  j.trigger_key = st.text(2);
  j.source_model = st.text(3);
  j.target_snapshot = st.optional_text(4);
  j.deployment_id = st.optional_text(5);
  j.lambda = st.real(6);
  j.tau = st.real(7);
  j.status = parse_job_status(st.text(8));
  j.result_model = st.optional_text(9);
  j.gate_id = st.optional_text(10);
  if (!st.is_null(11)) j.gate_pass = st.integer(11) != 0;
  j.reason = st.optional_text(12);
  if (!st.is_null(13)) j.ready_at_seq = static_cast<std::uint64_t>(st.integer(13));
  j.created_at = st.text(14);
  return j;
}

bool terminal(JobStatus s) { return s == JobStatus::succeeded || s == JobStatus::failed; }

// Drift job keys are "<deployment>@<epoch>:<alarm_at>".
std::uint64_t key_epoch(const std::string& key) {
  const auto at = key.rfind('@');
  const auto colon = key.rfind(':');
  return std::stoull(key.substr(at + 1, colon - at - 1));
}

}  // namespace

Orchestrator::Orchestrator(Store& store, ArtifactStore& artifacts, LineageGraph& lineage, Registry& registry,
                           EvalEngine& eval, DriftMonitor& drift, Deployer& deployer, OrchestratorConfig config)
    : store_(store), artifacts_(artifacts), lineage_(lineage), registry_(registry), eval_(eval), drift_(drift),
      deployer_(deployer), config_(config) {
  if (config_.tuning_window == 0) fail(ErrorCode::validation, "tuning_window must be positive");
  for (unsigned i = 0; i < config_.worker_count; ++i) workers_.emplace_back([this] { worker_loop(); });
}

Orchestrator::~Orchestrator() {
  {
    std::lock_guard lk(queue_mutex_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  for (auto& w : workers_) w.join();
}

TuningJob Orchestrator::insert_job(TuningJob job) {
  auto& db = store_.db();
  Database::Transaction tx(db);
  {
    auto st = db.query(std::string("SELECT ") + kJobColumns +
                           " FROM jobs WHERE trigger = ? AND trigger_key = ? AND source_model = ?",
                       to_string(job.trigger), job.trigger_key, job.source_model);
    if (st.step()) return read_job(st);
  }
  job.id = store_.next_id("job");
  job.created_at = store_.now();
  db.execute(std::string("INSERT INTO jobs(") + kJobColumns + ") VALUES(?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
             job.id, to_string(job.trigger), job.trigger_key, job.source_model, job.target_snapshot,
             job.deployment_id, job.lambda, job.tau, to_string(job.status), job.result_model, job.gate_id,
             job.gate_pass, job.reason, job.ready_at_seq, job.created_at);
  tx.commit();
  return job;
}

void Orchestrator::save_job(const TuningJob& j) {
  store_.db().execute(
      "UPDATE jobs SET target_snapshot = ?, status = ?, result_model = ?, gate_id = ?, gate_pass = ?, reason = ? "
      "WHERE id = ?",
      j.target_snapshot, to_string(j.status), j.result_model, j.gate_id, j.gate_pass, j.reason, j.id);
}

void Orchestrator::notify(std::string_view job_id, std::string_view kind, std::string_view message) {
  auto& db = store_.db();
  Database::Transaction tx(db);
  db.execute("INSERT INTO notifications(id, job_id, kind, message, created_at) VALUES(?, ?, ?, ?, ?)",
             store_.next_id("note"), job_id, kind, message, store_.now());
  tx.commit();
}

TuningJob Orchestrator::on_drift_alarm(std::string_view deployment_id, std::uint64_t epoch, std::uint64_t alarm_at) {
  Database::Transaction tx(store_.db());
  const DeploymentRecord dep = registry_.get_deployment(deployment_id);
  TuningJob job;
  job.trigger = JobTrigger::drift_alarm;
  job.trigger_key = dep.id + "@" + std::to_string(epoch) + ":" + std::to_string(alarm_at);
  job.source_model = dep.model_id;
  job.deployment_id = dep.id;
  job.lambda = config_.tune_lambda;
  job.tau = config_.tune_tau;
  job.ready_at_seq = alarm_at + config_.tuning_window - 1;
  if (!dep.auto_tune) {
    job.status = JobStatus::failed;
    job.reason = "auto_tune is disabled for this deployment";
  }
  const bool fresh = !store_.db().query("SELECT 1 FROM jobs WHERE trigger = ? AND trigger_key = ?",
                                        to_string(job.trigger), job.trigger_key)
                          .step();
  job = insert_job(job);
  if (fresh && !dep.auto_tune) {
    notify(job.id, "auto_tune_disabled", "drift alarm on " + dep.id + " at step " + std::to_string(alarm_at) +
                                             " was not acted on: auto_tune is disabled");
  }
  tx.commit();
  return job;
}

std::vector<TuningJob> Orchestrator::on_new_base_model(std::string_view model_id) {
  Database::Transaction tx(store_.db());
  const ModelRecord model = registry_.get_model(model_id);
  const TrainingRun run = registry_.get_run(model.created_by_run);
  const Snapshot snap = artifacts_.get_snapshot(run.input_snapshot);

  std::set<std::string> seen{snap.id, snap.dataset_id};
  std::deque<std::string> frontier{snap.id, snap.dataset_id};
  std::set<std::string> datasets;
  while (!frontier.empty()) {
    const std::string node = frontier.front();
    frontier.pop_front();
    for (auto& next : lineage_.connected(node, LinkKind::base_of, 1u)) {
      if (!seen.insert(next).second) continue;
      const std::string kind = store_.artifact_kind(next);
      if (kind == "dataset") {
        datasets.insert(next);
      } else if (kind == "snapshot") {
        const std::string ds = artifacts_.get_snapshot(next).dataset_id;
        datasets.insert(ds);
        if (seen.insert(ds).second) frontier.push_back(ds);
      }
      frontier.push_back(next);
    }
  }
  datasets.erase(snap.dataset_id);

  std::vector<TuningJob> jobs;
  for (const auto& ds : datasets) {
    const auto latest = artifacts_.latest_snapshot(ds);
    if (!latest) continue;
    TuningJob job;
    job.trigger = JobTrigger::new_base_model;
    job.trigger_key = model.id + ">" + ds;
    job.source_model = model.id;
    job.target_snapshot = latest->id;
    job.lambda = config_.tune_lambda;
    job.tau = config_.tune_tau;
    jobs.push_back(insert_job(job));
  }
  tx.commit();
  return jobs;
}

TuningJob Orchestrator::create_manual(std::string_view source_model, std::string_view target_snapshot,
                                      std::optional<double> lambda, std::optional<double> tau, std::string_view key) {
  Database::Transaction tx(store_.db());
  registry_.get_model(source_model);
  artifacts_.get_snapshot(target_snapshot);
  TuningJob job;
  job.trigger = JobTrigger::manual;
  job.source_model = std::string(source_model);
  job.target_snapshot = std::string(target_snapshot);
  job.lambda = lambda.value_or(config_.tune_lambda);
  job.tau = tau.value_or(config_.tune_tau);
  job.trigger_key = key.empty() ? store_.next_id("manual") : std::string(key);
  job = insert_job(job);
  tx.commit();
  return job;
}

void Orchestrator::execute(TuningJob& job) {
  const ModelRecord base = registry_.get_model(job.source_model);
  std::optional<DeploymentRecord> dep;
  if (job.trigger == JobTrigger::drift_alarm) {
    dep = registry_.get_deployment(*job.deployment_id);
    stage("snapshot");
    const std::uint64_t last = *job.ready_at_seq;
    const std::uint64_t first = last + 1 - config_.tuning_window;
    const Snapshot s = drift_.feedback_to_snapshot(dep->id, FeedbackRange{first, last, std::nullopt});
    job.target_snapshot = s.id;
  }
  const Snapshot target = artifacts_.get_snapshot(*job.target_snapshot);

  stage("tune");
  const std::string hp = tune_hyperparameters(base.artifact.hash, job.lambda, job.tau);
  const Table table = artifacts_.materialize(target.id);
  const LinearModel tuned = run_builtin(kTuneAlgorithm, hp, table, 1.0, 0, artifacts_);
  const BlobRef artifact = store_.blobs().put(serialize(tuned));

  RunSpec spec;
  spec.model_name = job.trigger == JobTrigger::new_base_model
                        ? base.name + "@" + artifacts_.get_dataset(target.dataset_id).name
                        : base.name;
  spec.algorithm = std::string(kTuneAlgorithm);
  spec.hyperparameters = hp;
  spec.framework = {std::string(kRuntimeName), std::string(kRuntimeVersion),
                    nlohmann::json{{"job", job.id}}};
  spec.input_snapshot = target.id;
  const auto [run, model] = registry_.record_training_run(spec, artifact);
  lineage_.add_link(model.id, base.id, LinkKind::tuned_from);
  job.result_model = model.id;

  stage("evaluate");
  eval_.auto_evaluate(model.id);

  stage("gate");
  const GateVerdict verdict = eval_.gate(model.id);
  job.gate_id = verdict.id;
  job.gate_pass = verdict.overall;
  if (!verdict.overall) {
    job.status = JobStatus::failed;
    job.reason = "gate rejected " + model.id;
    notify(job.id, "gate_failed", "candidate " + model.id + " did not pass gate " + verdict.id);
    stage("commit");
    return;
  }
  registry_.transition_status(model.id, ModelStatus::validated);

  if (dep) {
    if (dep->auto_deploy) {
      stage("deploy");
      DeployOptions opt;
      opt.auto_tune = dep->auto_tune;
      opt.auto_deploy = dep->auto_deploy;
      deployer_.deploy(model.id, dep->target, opt);
    } else {
      notify(job.id, "pending_approval",
             "candidate " + model.id + " passed gate " + verdict.id + " and awaits deployment to " + dep->target);
    }
  }
  job.status = JobStatus::succeeded;
  stage("commit");
}

TuningJob Orchestrator::run_job(std::string_view job_id) {
  {
    std::lock_guard lk(queue_mutex_);
    if (in_flight_.count(std::string(job_id))) return get(job_id);
    in_flight_.insert(std::string(job_id));
  }
  struct Release {
    Orchestrator* self;
    std::string id;
    ~Release() {
      {
        std::lock_guard lk(self->queue_mutex_);
        self->in_flight_.erase(id);
      }
      self->idle_cv_.notify_all();
    }
  } release{this, std::string(job_id)};

  TuningJob job = get(job_id);
  if (terminal(job.status)) return job;
  if (job.trigger == JobTrigger::drift_alarm) {
    const DriftState s = drift_.state(*job.deployment_id);
    if (s.epoch != key_epoch(job.trigger_key) || s.last_seq < *job.ready_at_seq) {
      fail(ErrorCode::state, "job " + job.id + " is waiting for feedback up to seq " +
                                 std::to_string(*job.ready_at_seq),
           Json{{"reason", "not_ready"}, {"ready_at_seq", *job.ready_at_seq}, {"last_seq", s.last_seq}});
    }
  }
  {
    Database::Transaction tx(store_.db());
    job.status = JobStatus::running;
    save_job(job);
    tx.commit();
  }
  try {
    Database::Transaction tx(store_.db());
    execute(job);
    save_job(job);
    tx.commit();
  } catch (const std::exception& e) {
    Database::Transaction tx(store_.db());
    job = get(job_id);
    job.status = JobStatus::failed;
    job.reason = e.what();
    save_job(job);
    notify(job.id, "job_failed", "job " + job.id + " failed: " + e.what());
    tx.commit();
  }
  return get(job_id);
}

TuningJob Orchestrator::cancel(std::string_view job_id) {
  {
    std::lock_guard lk(queue_mutex_);
    if (in_flight_.count(std::string(job_id))) {
      fail(ErrorCode::state, "job is executing and cannot be cancelled", Json{{"job", job_id}});
    }
  }
  Database::Transaction tx(store_.db());
  TuningJob job = get(job_id);
  if (terminal(job.status)) {
    fail(ErrorCode::state, "job " + job.id + " already " + std::string(to_string(job.status)),
         Json{{"current", to_string(job.status)}});
  }
  job.status = JobStatus::failed;
  job.reason = "cancelled";
  save_job(job);
  tx.commit();
  return job;
}

TuningJob Orchestrator::get(std::string_view job_id) {
  auto& db = store_.db();
  auto lk = db.lock();
  auto st = db.query(std::string("SELECT ") + kJobColumns + " FROM jobs WHERE id = ?", job_id);
  if (!st.step()) not_found("job", job_id);
  return read_job(st);
}

std::vector<TuningJob> Orchestrator::list() {
  auto& db = store_.db();
  auto lk = db.lock();
  std::vector<TuningJob> out;
  auto st = db.query(std::string("SELECT ") + kJobColumns + " FROM jobs ORDER BY seq");
  while (st.step()) out.push_back(read_job(st));
  return out;
}

std::vector<Notification> Orchestrator::notifications() {
  auto& db = store_.db();
  auto lk = db.lock();
  std::vector<Notification> out;
  auto st = db.query("SELECT id, job_id, kind, message, created_at FROM notifications ORDER BY seq");
  while (st.step()) out.push_back({st.text(0), st.text(1), st.text(2), st.text(3), st.text(4)});
  return out;
}

std::vector<std::string> Orchestrator::ready_jobs() {
  std::vector<std::string> ready;
  auto& db = store_.db();
  Database::Transaction tx(db);
  std::set<std::string> busy;
  {
    std::lock_guard lk(queue_mutex_);
    busy = in_flight_;
  }
  for (TuningJob& job : list()) {
    if (terminal(job.status) || busy.count(job.id)) continue;
    if (job.trigger == JobTrigger::drift_alarm) {
      const DeploymentRecord dep = registry_.get_deployment(*job.deployment_id);
      const DriftState s = drift_.state(dep.id);
      if (!dep.active || s.epoch != key_epoch(job.trigger_key)) {
        job.status = JobStatus::failed;
        job.reason = "superseded: deployment " + dep.id + " changed before the tuning window filled";
        save_job(job);
        continue;
      }
      if (s.last_seq < *job.ready_at_seq) continue;
    }
    ready.push_back(job.id);
  }
  tx.commit();
  return ready;
}

void Orchestrator::pump() {
  if (config_.worker_count > 0) {
    {
      std::lock_guard lk(queue_mutex_);
      wake_ = true;
    }
    queue_cv_.notify_all();
    return;
  }
  for (const auto& id : ready_jobs()) run_job(id);
}

void Orchestrator::drain() {
  while (true) {
    const auto ready = ready_jobs();
    bool busy;
    {
      std::lock_guard lk(queue_mutex_);
      busy = !in_flight_.empty();
    }
    if (ready.empty() && !busy) return;
    if (config_.worker_count == 0) {
      pump();
    } else {
      pump();
      std::unique_lock lk(queue_mutex_);
      idle_cv_.wait_for(lk, std::chrono::milliseconds(20));
    }
  }
}

void Orchestrator::worker_loop() {
  while (true) {
    {
      std::unique_lock lk(queue_mutex_);
      queue_cv_.wait(lk, [this] { return wake_ || stopping_; });
      if (stopping_) return;
      wake_ = false;
    }
    try {
      for (const auto& id : ready_jobs()) run_job(id);
    } catch (const std::exception&) {
      // a job that fails is recorded by run_job; anything else is retried on the next wake
    }
    idle_cv_.notify_all();
  }
}

}  // namespace mmgr

#pragma once

#include "mmgr/deployer.hpp"
#include "mmgr/drift_monitor.hpp"
#include "mmgr/eval_engine.hpp"
#include "mmgr/registry.hpp"

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace mmgr {

enum class JobTrigger { drift_alarm, new_base_model, manual };
enum class JobStatus { queued, running, succeeded, failed };

std::string_view to_string(JobTrigger t);
std::string_view to_string(JobStatus s);
JobTrigger parse_job_trigger(std::string_view s);

struct TuningJob {
  std::string id;
  JobTrigger trigger = JobTrigger::manual;
  std::string trigger_key;  // dedup key of the trigger instance
  std::string source_model;
  std::optional<std::string> target_snapshot;  // drift jobs fill this when they run
  std::optional<std::string> deployment_id;
  double lambda = 0.0;
  double tau = 1.0;
  JobStatus status = JobStatus::queued;
  std::optional<std::string> result_model;
  std::optional<std::string> gate_id;
  std::optional<bool> gate_pass;
  std::optional<std::string> reason;
  std::optional<std::uint64_t> ready_at_seq;  // drift jobs wait for this much feedback
  std::string created_at;
};

struct Notification {
  std::string id;
  std::string job_id;
  std::string kind;  // gate_failed, job_failed, pending_approval, auto_tune_disabled
  std::string message;
  std::string created_at;
};

struct OrchestratorConfig {
  std::size_t tuning_window = 500;
  double tune_lambda = 0.0;
  double tune_tau = 1.0;
  unsigned worker_count = 0;  // 0 runs ready jobs inline
};

/// Automates tune -> evaluate -> gate -> (re)deploy.
class Orchestrator {
 public:
  Orchestrator(Store& store, ArtifactStore& artifacts, LineageGraph& lineage, Registry& registry,
               EvalEngine& eval, DriftMonitor& drift, Deployer& deployer,
               OrchestratorConfig config = {});
  ~Orchestrator();

  /// Idempotent on (deployment, epoch, alarm_at). The job becomes ready once
  /// the deployment has logged tuning_window events from the alarm on.
  TuningJob on_drift_alarm(std::string_view deployment_id, std::uint64_t epoch,
                           std::uint64_t alarm_at);

  /// One job per dataset reachable over base_of from the model's training
  /// snapshot (or its dataset), targeting that dataset's latest snapshot.
  std::vector<TuningJob> on_new_base_model(std::string_view model_id);

  TuningJob create_manual(std::string_view source_model, std::string_view target_snapshot,
                          std::optional<double> lambda, std::optional<double> tau,
                          std::string_view key = "");

  /// Executes a queued (or interrupted) job; terminal jobs are returned as is.
  TuningJob run_job(std::string_view job_id);
  TuningJob cancel(std::string_view job_id);
  TuningJob get(std::string_view job_id);
  std::vector<TuningJob> list();
  std::vector<Notification> notifications();

  /// Runs (inline mode) or hands to the workers (worker mode) every ready job.
  void pump();
  /// Blocks until no ready job is pending or running.
  void drain();

  /// Test hook invoked at named pipeline stages inside the job transaction;
  /// throwing from it simulates a crash before commit.
  void set_fault_hook(std::function<void(std::string_view stage)> hook) { fault_ = std::move(hook); }

 private:
  TuningJob insert_job(TuningJob job);
  void save_job(const TuningJob& job);
  void notify(std::string_view job_id, std::string_view kind, std::string_view message);
  std::vector<std::string> ready_jobs();
  void execute(TuningJob& job);
  void worker_loop();
  void stage(std::string_view name) {
    if (fault_) fault_(name);
  }

  Store& store_;
  ArtifactStore& artifacts_;
  LineageGraph& lineage_;
  Registry& registry_;
  EvalEngine& eval_;
  DriftMonitor& drift_;
  Deployer& deployer_;
  OrchestratorConfig config_;
  std::function<void(std::string_view)> fault_;

  std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::condition_variable idle_cv_;
  std::set<std::string> in_flight_;
  bool wake_ = false;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

}  // namespace mmgr

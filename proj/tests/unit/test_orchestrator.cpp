#include "../support.hpp"

#include "mmgr/linear_model.hpp"

#include <doctest.h>

using namespace mmgr;
using namespace mmgr::testing;

namespace {

struct SimulatedCrash {};

Config small_window() {
  Config c;
  c.jobs.tuning_window = 40;
  return c;
}

/// Deployed model on y = 1 + 2 x1 - x2 whose feedback comes from a process
/// with the x1 slope flipped.
struct Drifting {
  Scratch s{small_window()};
  ProcessSpec p = linear_process({2.0, -1.0}, 1.0, 0.1);
  Snapshot snap;
  ModelRecord model;
  DeploymentRecord dep;
  LinearModel served;
  Xorshift64Star rng{17};
  std::uint64_t seq = 0;

  explicit Drifting(DeployOptions opts = {}) {
    snap = seed_dataset(s.svc, "base", p, 300, 1).second;
    model = validated_model(s.svc, "m", snap, p);
    dep = s.svc.deployer().deploy(model.id, "edge", opts);
    served = deserialize(s.svc.artifacts().get_blob(model.artifact.hash));
  }

  FeedbackEvent next(bool drifted) {
    FeedbackEvent e;
    e.deployment_id = dep.id;
    e.seq = ++seq;
    const double x1 = 2.0 * rng.uniform() - 1.0, x2 = 2.0 * rng.uniform() - 1.0;
    e.features = {{"x1", x1}, {"x2", x2}};
    e.prediction = predict(served, e.features);
    e.observation = 1.0 + (drifted ? -2.0 : 2.0) * x1 - x2 + 0.1 * rng.normal();
    e.ts = static_cast<std::int64_t>(seq);
    return e;
  }

  /// Feeds until the job for the first alarm has had its window; returns the alarm step.
  std::uint64_t feed(std::uint64_t quiet, std::uint64_t drifted) {
    for (std::uint64_t i = 0; i < quiet; ++i) s.svc.ingest_feedback(next(false));
    for (std::uint64_t i = 0; i < drifted; ++i) {
      if (!s.svc.registry().get_deployment(dep.id).active) break;  // the job has redeployed
      s.svc.ingest_feedback(next(true));
    }
    for (const auto& j : s.svc.jobs().list()) {
      if (j.trigger == JobTrigger::drift_alarm) return std::stoull(j.trigger_key.substr(j.trigger_key.find(':') + 1));
    }
    return s.svc.drift().state(dep.id).ph.alarm_at.value_or(0);
  }
};

}  // namespace

TEST_CASE("manual jobs tune, gate and validate") {
  Scratch s;
  const ProcessSpec p = linear_process({2.0, -1.0}, 1.0, 0.1);
  auto [d, snap] = seed_dataset(s.svc, "d", p, 200, 1);
  const ModelRecord base = validated_model(s.svc, "m", snap, p);
  const Snapshot more = s.svc.artifacts().ingest_snapshot(d.id, generate_training_csv(p, 200, 2));
  TuningJob job = s.svc.jobs().create_manual(base.id, more.id, std::nullopt, 5.0, "k1");
  CHECK(job.status == JobStatus::queued);
  CHECK(job.tau == 5.0);
  CHECK(s.svc.jobs().create_manual(base.id, more.id, std::nullopt, 5.0, "k1").id == job.id);
  job = s.svc.jobs().run_job(job.id);
  CHECK(job.status == JobStatus::succeeded);
  REQUIRE(job.result_model);
  const ModelRecord tuned = s.svc.registry().get_model(*job.result_model);
  CHECK(tuned.name == "m");
  CHECK(tuned.version == 2);
  CHECK(tuned.status == ModelStatus::validated);
  CHECK(s.svc.lineage().has_link(tuned.id, base.id, LinkKind::tuned_from));
  CHECK(s.svc.jobs().run_job(job.id).status == JobStatus::succeeded);
  CHECK_THROWS_AS(s.svc.jobs().cancel(job.id), Error);
  CHECK_THROWS_AS(s.svc.jobs().create_manual(base.id, "snap-999999", std::nullopt, std::nullopt), Error);
}

TEST_CASE("a rejected candidate is kept and reported") {
  Scratch s;
  const ProcessSpec p = linear_process({2.0, -1.0}, 1.0, 0.1);
  auto [d, snap] = seed_dataset(s.svc, "d", p, 200, 1);
  const ModelRecord base = validated_model(s.svc, "m", snap, p);
  // a heavy ridge on the same data is worse than the base everywhere
  const TuningJob job = s.svc.jobs().run_job(s.svc.jobs().create_manual(base.id, snap.id, 1e4, 0.0).id);
  CHECK(job.status == JobStatus::failed);
  CHECK(job.gate_pass == false);
  REQUIRE(job.result_model);
  CHECK(s.svc.registry().get_model(*job.result_model).status == ModelStatus::candidate);
  const auto notes = s.svc.jobs().notifications();
  REQUIRE(notes.size() == 1);
  CHECK(notes[0].kind == "gate_failed");
  CHECK(notes[0].job_id == job.id);
}

TEST_CASE("cancel only touches queued jobs") {
  Scratch s;
  const ProcessSpec p = linear_process({1.0}, 0.0, 0.1);
  auto [d, snap] = seed_dataset(s.svc, "d", p, 50, 1);
  const ModelRecord base = validated_model(s.svc, "m", snap, p);
  const TuningJob job = s.svc.jobs().create_manual(base.id, snap.id, std::nullopt, std::nullopt);
  const TuningJob c = s.svc.jobs().cancel(job.id);
  CHECK(c.status == JobStatus::failed);
  CHECK(c.reason == "cancelled");
  CHECK(s.svc.jobs().run_job(job.id).status == JobStatus::failed);
  CHECK_THROWS_AS(s.svc.jobs().get("job-999999"), Error);
}

TEST_CASE("drift alarm waits for the tuning window then redeploys") {
  Drifting d;
  const std::uint64_t alarm = d.feed(200, 60);
  REQUIRE(alarm > 200);
  auto jobs = d.s.svc.jobs().list();
  REQUIRE(jobs.size() == 1);
  const TuningJob& job = jobs[0];
  CHECK(job.trigger == JobTrigger::drift_alarm);
  CHECK(job.trigger_key == d.dep.id + "@0:" + std::to_string(alarm));
  CHECK(job.ready_at_seq == alarm + 39);
  if (d.seq < alarm + 39) {
    CHECK(job.status == JobStatus::queued);
    try {
      d.s.svc.jobs().run_job(job.id);
      FAIL("job ran before its window filled");
    } catch (const Error& e) {
      CHECK(e.detail()["reason"] == "not_ready");
    }
    d.feed(0, alarm + 39 - d.seq);
  }
  const TuningJob done = d.s.svc.jobs().get(job.id);
  CHECK(done.status == JobStatus::succeeded);
  REQUIRE(done.target_snapshot);
  CHECK(d.s.svc.lineage().has_link(*done.target_snapshot, d.snap.id, LinkKind::newer_recording_of));
  CHECK(d.s.svc.artifacts().get_snapshot(*done.target_snapshot).row_count == 40);
  const auto active = d.s.svc.registry().active_deployment("edge");
  REQUIRE(active);
  CHECK(active->model_id == *done.result_model);
  CHECK(d.s.svc.deployer().command_for(d.dep.id).action == "redeploy");
  CHECK(d.s.svc.drift().state(d.dep.id).epoch == 1);
  CHECK(d.s.svc.registry().audit().ok());

  // replaying the alarm is idempotent
  CHECK(d.s.svc.jobs().on_drift_alarm(d.dep.id, 0, alarm).id == job.id);
  CHECK(d.s.svc.jobs().list().size() == 1);
}

TEST_CASE("without auto_deploy a passing candidate awaits approval") {
  Drifting d({.auto_deploy = false});
  const std::uint64_t alarm = d.feed(200, 60);
  REQUIRE(alarm > 0);
  if (d.seq < alarm + 39) d.feed(0, alarm + 39 - d.seq);
  const TuningJob job = d.s.svc.jobs().list().at(0);
  CHECK(job.status == JobStatus::succeeded);
  CHECK(d.s.svc.registry().get_model(*job.result_model).status == ModelStatus::validated);
  CHECK(d.s.svc.registry().active_deployment("edge")->id == d.dep.id);
  const auto notes = d.s.svc.jobs().notifications();
  REQUIRE(notes.size() == 1);
  CHECK(notes[0].kind == "pending_approval");
}

TEST_CASE("with auto_tune off an alarm only notifies") {
  Drifting d({.auto_tune = false});
  REQUIRE(d.feed(200, 60) > 0);
  const auto jobs = d.s.svc.jobs().list();
  REQUIRE(jobs.size() == 1);
  CHECK(jobs[0].status == JobStatus::failed);
  CHECK(d.s.svc.jobs().notifications().at(0).kind == "auto_tune_disabled");
}

TEST_CASE("a reset before the window fills supersedes the job") {
  Drifting d;
  const std::uint64_t alarm = d.feed(200, 0);
  CHECK(alarm == 0);
  // feed just past the alarm, then reset
  std::uint64_t at = 0;
  while (at == 0) {
    d.s.svc.ingest_feedback(d.next(true));
    at = d.s.svc.drift().state(d.dep.id).ph.alarm_at.value_or(0);
  }
  d.s.svc.drift().reset_drift(d.dep.id);
  d.s.svc.jobs().pump();
  const TuningJob job = d.s.svc.jobs().list().at(0);
  CHECK(job.status == JobStatus::failed);
  CHECK(job.reason->rfind("superseded", 0) == 0);
}

TEST_CASE("a crash mid-job leaves nothing behind and the job re-runs cleanly") {
  for (const char* crash_at : {"snapshot", "tune", "evaluate", "gate", "deploy", "commit"}) {
    CAPTURE(crash_at);
    Drifting d;
    bool armed = true;
    d.s.svc.jobs().set_fault_hook([&](std::string_view stage) {
      if (armed && stage == crash_at) throw SimulatedCrash{};
    });
    const std::size_t models_before = d.s.svc.registry().list_models().size();
    bool crashed = false;
    try {
      d.feed(200, 200);
    } catch (const SimulatedCrash&) {
      crashed = true;
    }
    REQUIRE(crashed);
    TuningJob job = d.s.svc.jobs().list().at(0);
    CHECK(job.status == JobStatus::running);
    CHECK(d.s.svc.registry().list_models().size() == models_before);
    CHECK(d.s.svc.registry().active_deployment("edge")->id == d.dep.id);
    CHECK(d.s.svc.registry().audit().ok());

    armed = false;
    job = d.s.svc.jobs().run_job(job.id);
    CHECK(job.status == JobStatus::succeeded);
    CHECK(d.s.svc.registry().list_models().size() == models_before + 1);
    CHECK(d.s.svc.registry().active_deployment("edge")->model_id == *job.result_model);
    CHECK(d.s.svc.registry().audit().ok());
  }
}

TEST_CASE("validating a base model fans out to datasets linked base_of") {
  Scratch s;
  const ProcessSpec p = linear_process({2.0, -1.0}, 1.0, 0.1);
  auto [base_ds, base_snap] = seed_dataset(s.svc, "base", p, 300, 1);
  std::vector<Dataset> specific;
  for (int i = 0; i < 3; ++i) {
    ProcessSpec q = p;
    q.intercept += 0.2 * i;
    specific.push_back(seed_dataset(s.svc, "site" + std::to_string(i), q, 100, 10 + i).first);
  }
  s.svc.lineage().add_link(base_snap.id, specific[0].id, LinkKind::base_of);
  s.svc.lineage().add_link(base_snap.id, specific[1].id, LinkKind::base_of);
  // the third descends from the second
  s.svc.lineage().add_link(specific[1].id, specific[2].id, LinkKind::base_of);

  const ModelRecord v1 = validated_model(s.svc, "base-model", base_snap, p);
  const auto jobs = s.svc.jobs().list();
  REQUIRE(jobs.size() == 3);
  std::set<std::string> names;
  for (const auto& j : jobs) {
    CHECK(j.trigger == JobTrigger::new_base_model);
    CHECK(j.source_model == v1.id);
    CHECK(j.status == JobStatus::succeeded);
    names.insert(s.svc.registry().get_model(*j.result_model).name);
  }
  CHECK(names == std::set<std::string>{"base-model@site0", "base-model@site1", "base-model@site2"});
  CHECK(s.svc.jobs().on_new_base_model(v1.id).size() == 3);
  CHECK(s.svc.jobs().list().size() == 3);
}

TEST_CASE("worker threads drain the queue") {
  TempDir dir;
  Config threaded;
  threaded.data_dir = dir.path();
  threaded.jobs.worker_count = 2;
  Service svc(threaded, stepping_clock(fixed_epoch()));
  const ProcessSpec p = linear_process({1.0}, 0.0, 0.1);
  auto [d, snap] = seed_dataset(svc, "d", p, 60, 1);
  const ModelRecord base = validated_model(svc, "m", snap, p);
  for (int i = 0; i < 4; ++i) {
    svc.jobs().create_manual(base.id, snap.id, std::nullopt, 1.0 + i);
  }
  svc.jobs().pump();
  svc.jobs().drain();
  for (const auto& j : svc.jobs().list()) CHECK(j.status != JobStatus::queued);
  CHECK(svc.registry().audit().ok());
}

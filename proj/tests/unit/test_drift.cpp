#include "../support.hpp"

#include <doctest.h>

using namespace mmgr;
using namespace mmgr::testing;

namespace {

struct Deployed {
  Scratch s;
  ProcessSpec p = linear_process({2.0, -1.0}, 1.0, 0.1);
  Snapshot snap;
  ModelRecord model;
  DeploymentRecord dep;

  explicit Deployed(DeployOptions opts = {.auto_tune = false}) {
    snap = seed_dataset(s.svc, "d", p, 200, 1).second;
    model = validated_model(s.svc, "m", snap, p);
    dep = s.svc.deployer().deploy(model.id, "edge-1", opts);
  }

  FeedbackEvent event(std::uint64_t seq, double residual) {
    FeedbackEvent e;
    e.deployment_id = dep.id;
    e.seq = seq;
    e.features = {{"x1", 0.5}, {"x2", -0.25}};
    e.prediction = 1.0;
    e.observation = 1.0 + residual;
    e.ts = static_cast<std::int64_t>(seq);
    return e;
  }
};

}  // namespace

TEST_CASE("page-hinkley steps match the direct recurrence") {
  Xorshift64Star rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const PageHinkleyParams params{rng.uniform() * 0.5, 1.0 + rng.uniform() * 20.0};
    OraclePH oracle{params.delta, params.lambda};
    PageHinkleyState st;
    for (int i = 0; i < 3000; ++i) {
      const double e = std::abs(rng.normal() + (i > 1500 ? 2.0 : 0.0));
      st = page_hinkley_update(st, e, params);
      oracle.push(e);
      CHECK(st.n == oracle.n);
      CHECK(st.mean == oracle.mean);
      CHECK(st.ph_m == oracle.m);
      CHECK(st.ph_min == oracle.m_min);
      CHECK(st.alarm == (oracle.alarm_at != 0));
      if (st.alarm) CHECK(*st.alarm_at == oracle.alarm_at);
    }
  }
}

TEST_CASE("alarm latches") {
  PageHinkleyState st;
  const PageHinkleyParams params{0.0, 1.0};
  st = page_hinkley_update(st, 0.0, params);
  st = page_hinkley_update(st, 10.0, params);
  REQUIRE(st.alarm);
  const auto at = st.alarm_at;
  for (int i = 0; i < 100; ++i) st = page_hinkley_update(st, 0.0, params);
  CHECK(st.alarm);
  CHECK(st.alarm_at == at);
}

TEST_CASE("default parameters scale with the training residual spread") {
  const DriftDefaults d;
  const auto p = default_drift_params(0.1, d);
  CHECK(p.delta == doctest::Approx(0.025));
  CHECK(p.lambda == doctest::Approx(2.0));
  CHECK(default_drift_params(0.0, d).lambda == doctest::Approx(20e-6));
}

TEST_CASE("monte-carlo counts for the literal and the scaled parameters are frozen") {
  // Counts produced once by an independent Python transcription of the
  // generator and the detector, then pinned here. The
  // literal parameters alarm on every stationary stream long before 10,000
  // samples; the scaled defaults detect every shift without false alarms.
  const auto run = [](double delta, double lambda) {
    return drift_trials(100, 1000, 5.0, 50, 10'000, [=] {
      auto ph = std::make_shared<OraclePH>(OraclePH{delta, lambda});
      return [ph](double e) { return ph->push(e); };
    });
  };
  const DriftTrialCounts lit = run(0.05, 2.5);
  CHECK(lit.detected == 0);
  CHECK(lit.early == 100);
  CHECK(lit.false_alarms == 100);

  // unit noise, so scale = 1 under the deployed defaults
  const DriftTrialCounts scaled = run(0.25, 20.0);
  CHECK(scaled.detected == 100);
  CHECK(scaled.early == 0);
  CHECK(scaled.false_alarms == 0);

  // the library detector must reproduce the oracle counts exactly
  const DriftTrialCounts lib = drift_trials(100, 1000, 5.0, 50, 10'000, [] {
    auto st = std::make_shared<PageHinkleyState>();
    return [st](double e) {
      *st = page_hinkley_update(*st, e, {0.05, 2.5});
      return st->alarm_at.value_or(0);
    };
  });
  CHECK(lib.detected == lit.detected);
  CHECK(lib.early == lit.early);
  CHECK(lib.false_alarms == lit.false_alarms);
}

TEST_CASE("feedback ordering, schema and activity checks") {
  Deployed d;
  auto& mon = d.s.svc.drift();
  mon.ingest_feedback(d.event(1, 0.1));
  mon.ingest_feedback(d.event(2, 0.1));
  try {
    mon.ingest_feedback(d.event(4, 0.1));
    FAIL("gap accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ordering);
    CHECK(e.detail()["expected"] == 3);
    CHECK(e.detail()["got"] == 4);
  }
  CHECK_THROWS_AS(mon.ingest_feedback(d.event(2, 0.1)), Error);
  FeedbackEvent bad = d.event(3, 0.1);
  bad.features.erase("x2");
  try {
    mon.ingest_feedback(bad);
    FAIL("missing feature accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::schema);
  }
  bad = d.event(3, 0.1);
  bad.observation = INFINITY;
  CHECK_THROWS_AS(mon.ingest_feedback(bad), Error);
  CHECK(mon.state(d.dep.id).last_seq == 2);

  FeedbackEvent unknown = d.event(1, 0.1);
  unknown.deployment_id = "dep-999999";
  CHECK_THROWS_AS(mon.ingest_feedback(unknown), Error);

  const ModelRecord v2 = validated_model(d.s.svc, "m", d.snap, d.p);
  d.s.svc.deployer().deploy(v2.id, "edge-1");
  try {
    mon.ingest_feedback(d.event(3, 0.1));
    FAIL("inactive deployment accepted feedback");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::state);
    CHECK(e.detail()["reason"] == "inactive");
  }
}

TEST_CASE("reset starts a new epoch with its own sequence") {
  Deployed d({.drift_delta = 0.0, .drift_lambda = 1.0, .auto_tune = false});
  auto& mon = d.s.svc.drift();
  for (std::uint64_t i = 1; i <= 5; ++i) mon.ingest_feedback(d.event(i, i == 5 ? 5.0 : 0.0));
  DriftState st = mon.state(d.dep.id);
  CHECK(st.ph.alarm);
  CHECK(st.ph.alarm_at == 5);
  st = mon.reset_drift(d.dep.id);
  CHECK(st.epoch == 1);
  CHECK_FALSE(st.ph.alarm);
  CHECK(st.ph.n == 0);
  mon.ingest_feedback(d.event(1, 0.0));
  const auto evs = mon.events(d.dep.id, {.last_n = 10});
  REQUIRE(evs.size() == 1);
  CHECK(evs[0].epoch == 1);
  CHECK_THROWS_AS(mon.events(d.dep.id, {.first = 1, .last = 1, .last_n = 1}), Error);
  CHECK_THROWS_AS(mon.events(d.dep.id, {.first = 3, .last = 1}), Error);
}

TEST_CASE("feedback becomes a newer recording of the training snapshot") {
  Deployed d;
  auto& mon = d.s.svc.drift();
  for (std::uint64_t i = 1; i <= 30; ++i) mon.ingest_feedback(d.event(i, 0.01 * static_cast<double>(i)));
  const Snapshot snap = mon.feedback_to_snapshot(d.dep.id, {.first = 11, .last = 30});
  CHECK(snap.row_count == 20);
  CHECK(snap.dataset_id == d.snap.dataset_id);
  CHECK(snap.parent == d.snap.id);
  CHECK(d.s.svc.lineage().has_link(snap.id, d.snap.id, LinkKind::newer_recording_of));
  const Table t = d.s.svc.artifacts().materialize(snap.id);
  CHECK(t.numeric("y").front() == doctest::Approx(1.11));
  CHECK(t.find("x1") != nullptr);
  CHECK_THROWS_AS(mon.feedback_to_snapshot(d.dep.id, {.first = 100, .last = 200}), Error);
}

#include "../support.hpp"

#include <doctest.h>

using namespace mmgr;
using namespace mmgr::testing;

TEST_CASE("metrics match long-double arithmetic") {
  Xorshift64Star rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(300);
    std::vector<double> y(n), y_hat(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = 10.0 * rng.normal();
      y_hat[i] = y[i] + rng.normal();
    }
    if (n == 1) y_hat[0] = y[0];
    const Metrics m = compute_metrics(y, y_hat);
    const OracleMetrics o = oracle_metrics(y, y_hat);
    CHECK(std::abs(m.rmse - static_cast<double>(o.rmse)) <= 1e-12 * std::max(1.0, static_cast<double>(o.rmse)));
    CHECK(std::abs(m.mae - static_cast<double>(o.mae)) <= 1e-12 * std::max(1.0, static_cast<double>(o.mae)));
    CHECK(std::abs(m.r2 - static_cast<double>(o.r2)) <= 1e-12);
    CHECK(m.rmse >= m.mae);
    CHECK(m.n == n);
  }
}

TEST_CASE("metric edge cases") {
  const std::vector<double> flat{2.0, 2.0, 2.0};
  CHECK(compute_metrics(flat, flat).r2 == 0.0);
  CHECK_THROWS_AS(compute_metrics(flat, std::vector<double>{2.0, 2.0, 2.5}), Error);
  CHECK_THROWS_AS(compute_metrics(std::vector<double>{}, std::vector<double>{}), Error);
  CHECK_THROWS_AS(compute_metrics(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}), Error);
  CHECK_THROWS_AS(compute_metrics(std::vector<double>{1.0, NAN}, std::vector<double>{1.0, 2.0}), Error);
  // identical errors: rmse and mae coincide exactly
  const Metrics m = compute_metrics(std::vector<double>{0.1, 0.2, 0.3}, std::vector<double>{0.2, 0.3, 0.4});
  CHECK(m.rmse >= m.mae);
}

TEST_CASE("gate thresholds") {
  const GateConfig cfg{.epsilon = 0.1, .abs_factor = 1.05, .abs_floor = 1e-9};
  CHECK(judge_snapshot("s", 1.1, 1.0, 0.0, cfg).pass);
  CHECK_FALSE(judge_snapshot("s", 1.11, 1.0, 0.0, cfg).pass);
  CHECK(judge_snapshot("s", 5e-10, 0.0, 0.0, cfg).pass);
  CHECK(judge_snapshot("s", 2.1, std::nullopt, 2.0, cfg).pass);
  CHECK_FALSE(judge_snapshot("s", 2.2, std::nullopt, 2.0, cfg).pass);
  CHECK(judge_snapshot("s", 2.1, std::nullopt, 2.0, cfg).threshold == doctest::Approx(2.1));
}

TEST_CASE("evaluate reports missing columns") {
  Scratch s;
  const ProcessSpec p = linear_process({1.0, 2.0}, 0.0, 0.1);
  auto [d, snap] = seed_dataset(s.svc, "d", p, 40, 1);
  const ModelRecord m = train(s.svc, "m", snap, p);
  const Snapshot narrow = s.svc.artifacts().ingest_snapshot(d.id, "x1,y\n1,2\n2,3\n");
  try {
    s.svc.eval().evaluate(m.id, narrow.id);
    FAIL("evaluated without x2");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::schema);
    CHECK(e.detail()["missing"] == Json::array({"x2"}));
  }
  const EvaluationReport r = s.svc.eval().evaluate(m.id, snap.id);
  CHECK(r.metrics.n == 40);
  CHECK(s.svc.lineage().has_link(m.id, snap.id, LinkKind::evaluated_on));
}

TEST_CASE("auto_evaluate walks compatible and newer recordings and skips unfit snapshots") {
  Scratch s;
  const ProcessSpec p = linear_process({1.0}, 0.0, 0.1);
  auto [d, train_snap] = seed_dataset(s.svc, "d", p, 40, 1);
  auto& art = s.svc.artifacts();
  auto& g = s.svc.lineage();
  const Snapshot compat = art.ingest_snapshot(d.id, generate_training_csv(p, 20, 2));
  const Snapshot compat2 = art.ingest_snapshot(d.id, generate_training_csv(p, 20, 3));
  const Snapshot newer = art.ingest_snapshot(d.id, generate_training_csv(p, 20, 4));
  const Snapshot older = art.ingest_snapshot(d.id, generate_training_csv(p, 20, 5));
  const Snapshot broken = art.ingest_snapshot(d.id, "a,b\n1,2\n");
  const Snapshot unrelated = art.ingest_snapshot(d.id, generate_training_csv(p, 20, 6));
  g.add_link(compat.id, train_snap.id, LinkKind::compatible_with);
  g.add_link(compat.id, compat2.id, LinkKind::compatible_with);
  g.add_link(newer.id, train_snap.id, LinkKind::newer_recording_of);
  g.add_link(train_snap.id, older.id, LinkKind::newer_recording_of);
  g.add_link(broken.id, train_snap.id, LinkKind::compatible_with);
  g.add_link(train_snap.id, unrelated.id, LinkKind::base_of);
  const ModelRecord m = train(s.svc, "m", train_snap, p);

  const auto set = s.svc.eval().evaluation_set(m.id);
  REQUIRE(!set.empty());
  CHECK(set.front() == train_snap.id);
  const std::set<std::string> rest(set.begin() + 1, set.end());
  CHECK(rest == std::set<std::string>{compat.id, compat2.id, newer.id, broken.id});

  const std::string before = s.svc.registry().models_fingerprint();
  const AutoEvaluation ae = s.svc.eval().auto_evaluate(m.id);
  CHECK(ae.reports.size() == 4);
  REQUIRE(ae.skipped.size() == 1);
  CHECK(ae.skipped[0].snapshot_id == broken.id);
  CHECK(s.svc.registry().models_fingerprint() == before);
}

TEST_CASE("gate compares against the predecessor and can be inconclusive") {
  Scratch s;
  const ProcessSpec p = linear_process({1.0, -1.0}, 0.5, 0.1);
  auto [d, snap] = seed_dataset(s.svc, "d", p, 100, 1);
  const ModelRecord v1 = train(s.svc, "m", snap, p);
  const GateVerdict first = s.svc.eval().gate(v1.id);
  CHECK(first.overall);
  CHECK_FALSE(first.predecessor.has_value());

  const ModelRecord worse = train(s.svc, "m", snap, p, 500.0);
  const GateVerdict second = s.svc.eval().gate(worse.id);
  CHECK_FALSE(second.overall);
  CHECK(second.predecessor == v1.id);
  CHECK(s.svc.registry().latest_gate(worse.id)->id == second.id);

  // a successor over a feature the predecessor never saw, trained on a
  // snapshot the predecessor cannot read
  const Dataset other = s.svc.artifacts().create_dataset("other", "");
  const Snapshot only_z = s.svc.artifacts().ingest_snapshot(other.id, "z,y\n1,2\n2,4\n3,6.5\n4,8\n");
  TrainRequest r{"m", only_z.id, {"z"}, "y"};
  const ModelRecord alien = s.svc.train(r).second;
  try {
    s.svc.eval().gate(alien.id);
    FAIL("gate should be inconclusive");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::inconclusive);
    CHECK(e.detail()["considered"] == Json::array({only_z.id}));
  }
}

#include "../support.hpp"

#include "mmgr/bundle.hpp"
#include "mmgr/http.hpp"

#include <doctest.h>

using namespace mmgr;
using namespace mmgr::testing;

namespace {

/// ServiceClient straight onto a Service, with a switch to drop the link.
class DirectClient : public ServiceClient {
 public:
  explicit DirectClient(Service& svc) : svc_(svc) {}

  bool online = true;

  SendStatus send_feedback(const FeedbackEvent& e) override {
    if (!online) return SendStatus::unreachable;
    try {
      svc_.ingest_feedback(e);
      return SendStatus::accepted;
    } catch (const Error& err) {
      if (err.code() == ErrorCode::state) return SendStatus::inactive;
      throw;
    }
  }
  AgentCommand poll(std::string_view id) override {
    if (!online) return {"none", {}, {}, {}};
    return svc_.deployer().command_for(id);
  }
  std::string fetch_blob(std::string_view hash) override { return svc_.artifacts().get_blob(hash); }

 private:
  Service& svc_;
};

}  // namespace

TEST_CASE("process specs validate and serialize") {
  ProcessSpec p = linear_process({2.0, -1.0}, 1.0, 0.1, 9);
  p.drift.push_back({1000, {-2.0, -1.0}, 1.0});
  const ProcessSpec back = process_from_json(to_json(p));
  CHECK(to_json(back) == to_json(p));
  ProcessSpec bad = p;
  bad.coefficients.pop_back();
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = p;
  bad.features[0].low = 2.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = p;
  bad.noise_sigma = -1.0;
  CHECK_THROWS_AS(bad.validate(), Error);

  const std::string csv = generate_training_csv(p, 5, 1);
  CHECK(csv == generate_training_csv(p, 5, 1));
  CHECK(csv.substr(0, csv.find('\n')) == "x1,x2,y");
  CHECK(parse_csv(csv).row_count == 5);
}

TEST_CASE("the agent streams feedback and keeps order across outages") {
  Scratch s;
  const ProcessSpec p = linear_process({2.0, -1.0}, 1.0, 0.1, 4);
  auto [d, snap] = seed_dataset(s.svc, "d", p, 200, 1);
  const ModelRecord m = validated_model(s.svc, "m", snap, p);
  const DeploymentRecord dep = s.svc.deployer().deploy(m.id, "edge", {.auto_tune = false});
  DirectClient client(s.svc);
  EdgeAgent agent(client, dep.id, s.svc.artifacts().get_blob(dep.bundle.hash), {.poll_interval = 5});
  const AgentReport r = agent.run(p, 100);
  CHECK(r.residuals.size() == 100);
  CHECK(r.sent.size() == 100);
  CHECK(s.svc.drift().state(dep.id).last_seq == 100);
  CHECK(r.rmse_last(100) < 0.2);
  REQUIRE(r.segments.size() == 1);
  CHECK(r.segments[0].n == 100);
  CHECK(r.to_jsonl().find("\"summary\"") != std::string::npos);
}

TEST_CASE("buffered feedback survives a short outage and drops the oldest on overflow") {
  Scratch s;
  const ProcessSpec p = linear_process({1.0}, 0.0, 0.1, 4);
  auto [d, snap] = seed_dataset(s.svc, "d", p, 100, 1);
  const ModelRecord m = validated_model(s.svc, "m", snap, p);
  const DeploymentRecord dep = s.svc.deployer().deploy(m.id, "edge", {.auto_tune = false});

  class Flaky : public DirectClient {
   public:
    using DirectClient::DirectClient;
    std::uint64_t calls = 0;
    SendStatus send_feedback(const FeedbackEvent& e) override {
      ++calls;
      online = !(calls > 10 && calls <= 30);
      return DirectClient::send_feedback(e);
    }
  } client(s.svc);
  EdgeAgent agent(client, dep.id, s.svc.artifacts().get_blob(dep.bundle.hash), {.poll_interval = 1000});
  const AgentReport r = agent.run(p, 50);
  // nothing is lost at this outage length, and sequence numbers stay contiguous
  CHECK(r.sent.size() == 50);
  for (std::size_t i = 0; i < r.sent.size(); ++i) CHECK(r.sent[i].seq == i + 1);
}

TEST_CASE("the agent refuses bundles outside its runtime range") {
  Scratch s;
  const ProcessSpec p = linear_process({1.0}, 0.0, 0.1, 4);
  auto [d, snap] = seed_dataset(s.svc, "d", p, 100, 1);
  const ModelRecord m = validated_model(s.svc, "m", snap, p);
  const DeploymentRecord dep = s.svc.deployer().deploy(m.id, "edge");
  DirectClient client(s.svc);
  try {
    EdgeAgent agent(client, dep.id, s.svc.artifacts().get_blob(dep.bundle.hash), {.version = "2.1.0"});
    FAIL("agent accepted an incompatible bundle");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::unsupported);
  }
  CHECK_THROWS_AS(EdgeAgent(client, dep.id, "not a bundle"), Error);
}

TEST_CASE("the agent swaps bundles on redeploy and stops when retired") {
  Scratch s;
  const ProcessSpec p = linear_process({1.0}, 0.0, 0.1, 4);
  auto [d, snap] = seed_dataset(s.svc, "d", p, 100, 1);
  const ModelRecord v1 = validated_model(s.svc, "m", snap, p);
  const DeploymentRecord d1 = s.svc.deployer().deploy(v1.id, "edge", {.auto_tune = false});

  class Swapper : public DirectClient {
   public:
    Swapper(Service& svc, std::function<void(std::uint64_t)> hook) : DirectClient(svc), hook_(std::move(hook)) {}
    AgentCommand poll(std::string_view id) override {
      hook_(++polls);
      return DirectClient::poll(id);
    }
    std::uint64_t polls = 0;

   private:
    std::function<void(std::uint64_t)> hook_;
  };
  std::optional<DeploymentRecord> d2;
  Swapper client(s.svc, [&](std::uint64_t poll) {
    if (poll == 3) {
      const ModelRecord v2 = validated_model(s.svc, "m", snap, p);
      d2 = s.svc.deployer().deploy(v2.id, "edge", {.auto_tune = false});
    }
    if (poll == 6) s.svc.registry().deactivate_deployment(d2->id);
  });
  EdgeAgent agent(client, d1.id, s.svc.artifacts().get_blob(d1.bundle.hash), {.poll_interval = 10});
  const AgentReport r = agent.run(p, 1000);
  REQUIRE(r.swap_steps.size() == 1);
  CHECK(r.swap_steps[0] == 31);
  REQUIRE(r.segments.size() == 2);
  CHECK(r.segments[1].deployment_id == d2->id);
  CHECK(r.residuals.size() == 60);
  CHECK(s.svc.drift().state(d2->id).last_seq == 30);
}

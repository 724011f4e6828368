#pragma once

// Simulated edge device: serves predictions from a bundle on a synthetic
// linear process with scheduled concept drift and streams feedback back.

#include "mmgr/bundle.hpp"
#include "mmgr/deployer.hpp"
#include "mmgr/drift_monitor.hpp"
#include "mmgr/linear_model.hpp"

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mmgr {

struct FeatureRange {
  std::string name;
  double low = 0.0;
  double high = 1.0;
};

struct DriftStep {
  std::uint64_t at_step = 0;  // first step using the new truth
  std::vector<double> coefficients;
  double intercept = 0.0;
};

struct ProcessSpec {
  std::vector<FeatureRange> features;
  std::vector<double> coefficients;
  double intercept = 0.0;
  double noise_sigma = 0.0;
  std::vector<DriftStep> drift;
  std::uint64_t seed = 0;
  std::string target = "y";

  void validate() const;
};

ProcessSpec process_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ProcessSpec& p);

/// Header plus n rows of (features..., target), drawn from the process's
/// initial truth with the given seed.
std::string generate_training_csv(const ProcessSpec& process, std::size_t n, std::uint64_t seed);

/// The agent's view of the service.
class ServiceClient {
 public:
  enum class SendStatus { accepted, inactive, unreachable };

  virtual ~ServiceClient() = default;
  virtual SendStatus send_feedback(const FeedbackEvent& event) = 0;
  virtual AgentCommand poll(std::string_view deployment_id) = 0;
  virtual std::string fetch_blob(std::string_view hash) = 0;
};

struct AgentOptions {
  std::uint64_t poll_interval = 10;
  std::size_t max_buffered = 64;
  std::string version{kAgentVersion};
};

struct AgentSegment {
  std::string deployment_id;
  std::string model_id;
  std::uint64_t first_step = 0;
  std::uint64_t last_step = 0;
  std::uint64_t n = 0;
  double rmse = 0.0;
};

struct AgentReport {
  std::vector<AgentSegment> segments;
  std::vector<std::uint64_t> swap_steps;  // first step served by the new bundle
  std::vector<double> residuals;          // observation - prediction per step
  std::vector<FeedbackEvent> sent;        // in send order

  double rmse_last(std::size_t k) const;
  /// One JSON object per segment, then per swap, then a summary line.
  std::string to_jsonl() const;
};

class EdgeAgent {
 public:
  /// Verifies the bundle and the runtime requirement; refuses (unsupported)
  /// before serving anything when this agent's version is out of range.
  EdgeAgent(ServiceClient& client, std::string deployment_id, std::string_view bundle,
            AgentOptions options = {});

  AgentReport run(const ProcessSpec& process, std::uint64_t steps);

 private:
  void load(std::string deployment_id, std::string_view bundle);
  void deliver(FeedbackEvent event, AgentReport& report);
  bool check_command(AgentReport& report, std::uint64_t next_step);

  ServiceClient& client_;
  AgentOptions options_;
  std::string deployment_id_;
  std::string model_id_;
  LinearModel model_;
  std::uint64_t next_seq_ = 1;
  std::deque<FeedbackEvent> pending_;
};

}  // namespace mmgr

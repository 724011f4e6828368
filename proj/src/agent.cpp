#include "mmgr/agent.hpp"

#include "mmgr/error.hpp"
#include "mmgr/prng.hpp"
#include "mmgr/table.hpp"

#include <algorithm>
#include <cmath>

namespace mmgr {

namespace {

struct Truth {
  const std::vector<double>* coefficients;
  double intercept;
};

Truth truth_at(const ProcessSpec& p, std::uint64_t step) {
  Truth t{&p.coefficients, p.intercept};
  for (const auto& d : p.drift) {
    if (d.at_step <= step) t = {&d.coefficients, d.intercept};
  }
  return t;
}

// Draws one row: features in declaration order, then the noisy target.
std::vector<double> draw_row(const ProcessSpec& p, const Truth& t, Xorshift64Star& rng) {
  std::vector<double> row;
  double y = t.intercept;
  for (std::size_t i = 0; i < p.features.size(); ++i) {
    const auto& f = p.features[i];
    const double x = f.low + (f.high - f.low) * rng.uniform();
    row.push_back(x);
    y += (*t.coefficients)[i] * x;
  }
  row.push_back(y + p.noise_sigma * rng.normal());
  return row;
}

double rmse_of(const std::vector<double>& r, std::size_t from, std::size_t to) {
  if (to <= from) return 0.0;
  double ss = 0.0;
  for (std::size_t i = from; i < to; ++i) ss += r[i] * r[i];
  return std::sqrt(ss / static_cast<double>(to - from));
}

}  // namespace

void ProcessSpec::validate() const {
  if (features.empty()) fail(ErrorCode::validation, "process needs at least one feature");
  if (coefficients.size() != features.size()) {
    fail(ErrorCode::validation, "process coefficients must match the feature count");
  }
  for (const auto& f : features) {
    if (f.name.empty() || f.name == target) fail(ErrorCode::validation, "bad feature name: " + f.name);
    if (!(f.low < f.high)) fail(ErrorCode::validation, "feature " + f.name + " needs low < high");
  }
  if (!(noise_sigma >= 0.0)) fail(ErrorCode::validation, "noise_sigma must be >= 0");
  for (const auto& d : drift) {
    if (d.coefficients.size() != features.size()) {
      fail(ErrorCode::validation, "drift step coefficients must match the feature count");
    }
  }
}

ProcessSpec process_from_json(const nlohmann::json& j) {
  ProcessSpec p;
  try {
    for (const auto& f : j.at("features")) {
      p.features.push_back({f.at("name").get<std::string>(), f.value("low", 0.0), f.value("high", 1.0)});
    }
    p.coefficients = j.at("coefficients").get<std::vector<double>>();
    p.intercept = j.value("intercept", 0.0);
    p.noise_sigma = j.value("noise_sigma", 0.0);
    p.seed = j.value("seed", std::uint64_t{0});
    p.target = j.value("target", std::string("y"));
    if (j.contains("drift")) {
      for (const auto& d : j.at("drift")) {
        p.drift.push_back({d.at("at_step").get<std::uint64_t>(), d.at("coefficients").get<std::vector<double>>(),
                           d.value("intercept", 0.0)});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::validation, std::string("malformed process spec: ") + e.what());
  }
  p.validate();
  return p;
}

nlohmann::json to_json(const ProcessSpec& p) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : p.features) features.push_back({{"high", f.high}, {"low", f.low}, {"name", f.name}});
  nlohmann::json drift = nlohmann::json::array();
  for (const auto& d : p.drift) {
    drift.push_back({{"at_step", d.at_step}, {"coefficients", d.coefficients}, {"intercept", d.intercept}});
  }
  return {{"coefficients", p.coefficients}, {"drift", drift},   {"features", features},
          {"intercept", p.intercept},       {"noise_sigma", p.noise_sigma}, {"seed", p.seed},
          {"target", p.target}};
}

std::string generate_training_csv(const ProcessSpec& process, std::size_t n, std::uint64_t seed) {
  process.validate();
  Table t;
  t.row_count = n;
  for (const auto& f : process.features) t.columns.push_back({f.name, ColumnType::Float, {}, {}});
  t.columns.push_back({process.target, ColumnType::Float, {}, {}});
  Xorshift64Star rng(seed);
  const Truth truth{&process.coefficients, process.intercept};
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = draw_row(process, truth, rng);
    for (std::size_t c = 0; c < row.size(); ++c) t.columns[c].numbers.push_back(row[c]);
  }
  return to_csv(t);
}

double AgentReport::rmse_last(std::size_t k) const {
  const std::size_t from = residuals.size() > k ? residuals.size() - k : 0;
  return rmse_of(residuals, from, residuals.size());
}

std::string AgentReport::to_jsonl() const {
  std::string out;
  for (const auto& s : segments) {
    out += Json{{"segment", {{"deployment_id", s.deployment_id},
                             {"model_id", s.model_id},
                             {"first_step", s.first_step},
                             {"last_step", s.last_step},
                             {"n", s.n},
                             {"rmse", s.rmse}}}}
               .dump() +
           "\n";
  }
  for (auto step : swap_steps) out += Json{{"swap_at", step}}.dump() + "\n";
  out += Json{{"summary",
               {{"steps", residuals.size()},
                {"sent", sent.size()},
                {"swaps", swap_steps.size()},
                {"rmse", rmse_of(residuals, 0, residuals.size())}}}}
             .dump() +
         "\n";
  return out;
}

EdgeAgent::EdgeAgent(ServiceClient& client, std::string deployment_id, std::string_view bundle, AgentOptions options)
    : client_(client), options_(std::move(options)) {
  if (options_.poll_interval == 0) fail(ErrorCode::validation, "poll_interval must be positive");
  load(std::move(deployment_id), bundle);
}

void EdgeAgent::load(std::string deployment_id, std::string_view bundle) {
  const BundleManifest manifest = verify_bundle(bundle);
  const VersionRange range = parse_version_range(manifest.runtime_requirement);
  if (!range.contains(parse_semver(options_.version))) {
    fail(ErrorCode::unsupported,
         "agent " + options_.version + " does not satisfy runtime requirement " + manifest.runtime_requirement,
         Json{{"agent_version", options_.version}, {"runtime_requirement", manifest.runtime_requirement}});
  }
  model_ = deserialize(bundle_file(bundle, kModelPath));
  model_id_ = manifest.model_id;
  deployment_id_ = std::move(deployment_id);
  next_seq_ = 1;
  pending_.clear();
}

void EdgeAgent::deliver(FeedbackEvent event, AgentReport& report) {
  pending_.push_back(std::move(event));
  while (pending_.size() > options_.max_buffered) pending_.pop_front();
  while (!pending_.empty()) {
    const auto status = client_.send_feedback(pending_.front());
    if (status != ServiceClient::SendStatus::accepted) return;
    report.sent.push_back(std::move(pending_.front()));
    pending_.pop_front();
  }
}

bool EdgeAgent::check_command(AgentReport& report, std::uint64_t next_step) {
  const AgentCommand cmd = client_.poll(deployment_id_);
  if (cmd.action == "stop") return false;
  if (cmd.action == "redeploy" && cmd.deployment_id && cmd.bundle) {
    const std::string bundle = client_.fetch_blob(cmd.bundle->hash);
    load(*cmd.deployment_id, bundle);
    report.swap_steps.push_back(next_step);
    report.segments.push_back({deployment_id_, model_id_, next_step, next_step, 0, 0.0});
  }
  return true;
}

AgentReport EdgeAgent::run(const ProcessSpec& process, std::uint64_t steps) {
  process.validate();
  for (const auto& f : model_.feature_names) {
    const bool known = std::any_of(process.features.begin(), process.features.end(),
                                   [&](const FeatureRange& r) { return r.name == f; });
    if (!known) fail(ErrorCode::schema, "process does not produce model feature " + f);
  }
  AgentReport report;
  report.segments.push_back({deployment_id_, model_id_, 1, 1, 0, 0.0});
  std::size_t segment_start = 0;
  Xorshift64Star rng(process.seed);

  for (std::uint64_t step = 1; step <= steps; ++step) {
    if (step > 1 && (step - 1) % options_.poll_interval == 0) {
      const std::size_t before = report.segments.size();
      if (!check_command(report, step)) break;
      if (report.segments.size() != before) segment_start = report.residuals.size();
    }
    const auto row = draw_row(process, truth_at(process, step), rng);
    std::map<std::string, double> features;
    for (std::size_t i = 0; i < process.features.size(); ++i) features[process.features[i].name] = row[i];
    const double observation = row.back();
    const double prediction = predict(model_, features);
    report.residuals.push_back(observation - prediction);

    auto& seg = report.segments.back();
    seg.last_step = step;
    seg.n += 1;
    seg.rmse = rmse_of(report.residuals, segment_start, report.residuals.size());

    FeedbackEvent e;
    e.deployment_id = deployment_id_;
    e.seq = next_seq_++;
    e.features = std::move(features);
    e.prediction = prediction;
    e.observation = observation;
    e.ts = static_cast<std::int64_t>(step);
    deliver(std::move(e), report);
  }
  return report;
}

}  // namespace mmgr

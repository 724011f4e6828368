#pragma once

// Shared fixtures for the unit and acceptance binaries: scratch services,
// synthetic data, and the independent oracles the library is checked against.

#include "mmgr/agent.hpp"
#include "mmgr/error.hpp"
#include "mmgr/prng.hpp"
#include "mmgr/service.hpp"
#include "mmgr/table.hpp"

#include <Eigen/Dense>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace mmgr::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "mmgr") {
    static int counter = 0;
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::chrono::system_clock::time_point fixed_epoch() {
  return std::chrono::system_clock::time_point(std::chrono::seconds(1'767'225'600));  // 2026-01-01T00:00:00Z
}

inline Config test_config(const std::filesystem::path& dir) {
  Config c;
  c.data_dir = dir;
  c.jobs.worker_count = 0;
  return c;
}

/// A service on a scratch directory with a deterministic clock and inline jobs.
struct Scratch {
  TempDir dir;
  Service svc;

  explicit Scratch(Config cfg = {}) : dir("mmgr-test"), svc(with_dir(std::move(cfg), dir.path()), stepping_clock(fixed_epoch())) {}

  static Config with_dir(Config c, const std::filesystem::path& p) {
    c.data_dir = p;
    c.jobs.worker_count = 0;
    return c;
  }
};

/// y = intercept + sum coefficients * x + noise, features named x1..xp.
inline ProcessSpec linear_process(std::vector<double> coefficients, double intercept, double sigma,
                                  std::uint64_t seed = 1) {
  ProcessSpec p;
  for (std::size_t i = 0; i < coefficients.size(); ++i) {
    p.features.push_back({"x" + std::to_string(i + 1), -1.0, 1.0});
  }
  p.coefficients = std::move(coefficients);
  p.intercept = intercept;
  p.noise_sigma = sigma;
  p.seed = seed;
  return p;
}

inline std::vector<std::string> feature_names(const ProcessSpec& p) {
  std::vector<std::string> out;
  for (const auto& f : p.features) out.push_back(f.name);
  return out;
}

/// Dataset + one snapshot of `n` rows drawn from `p`.
inline std::pair<Dataset, Snapshot> seed_dataset(Service& s, const std::string& name, const ProcessSpec& p,
                                                 std::size_t n, std::uint64_t seed) {
  Dataset d = s.artifacts().create_dataset(name, "synthetic");
  Snapshot snap = s.artifacts().ingest_snapshot(d.id, generate_training_csv(p, n, seed));
  return {d, snap};
}

inline ModelRecord train(Service& s, const std::string& name, const Snapshot& snap, const ProcessSpec& p,
                         double lambda = 0.0) {
  TrainRequest r;
  r.model_name = name;
  r.snapshot_id = snap.id;
  r.features = feature_names(p);
  r.target = p.target;
  r.lambda = lambda;
  return s.train(r).second;
}

/// Trains, gates and validates.
inline ModelRecord validated_model(Service& s, const std::string& name, const Snapshot& snap, const ProcessSpec& p,
                                   double lambda = 0.0) {
  const ModelRecord m = train(s, name, snap, p, lambda);
  s.eval().gate(m.id);
  return s.transition_status(m.id, ModelStatus::validated);
}

// ---------------------------------------------------------------------------
// Oracles. None of these share code with the library beyond plain data.

struct OracleFit {
  double intercept = 0.0;
  Eigen::VectorXd coefficients;
};

/// Ridge by a column-pivoted QR of the augmented design [Z; sqrt(lambda) * E],
/// E selecting the non-intercept columns. A different algorithm from the
/// library's normal-equation Cholesky.
inline OracleFit oracle_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda) {
  const Eigen::Index n = x.rows(), p = x.cols();
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n + p, p + 1);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + p);
  z.block(0, 0, n, 1).setOnes();
  z.block(0, 1, n, p) = x;
  rhs.head(n) = y;
  for (Eigen::Index j = 0; j < p; ++j) z(n + j, j + 1) = std::sqrt(lambda);
  const Eigen::VectorXd beta = z.colPivHouseholderQr().solve(rhs);
  return {beta(0), beta.tail(p)};
}

/// Proximal ridge: minimizes |y - Z b|^2 + lambda |b_1..p|^2 + tau |b - b0|^2
/// through the same augmented QR.
inline OracleFit oracle_tune(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda, double tau,
                             const Eigen::VectorXd& base) {
  const Eigen::Index n = x.rows(), p = x.cols();
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n + p + p + 1, p + 1);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + p + p + 1);
  z.block(0, 0, n, 1).setOnes();
  z.block(0, 1, n, p) = x;
  rhs.head(n) = y;
  for (Eigen::Index j = 0; j < p; ++j) z(n + j, j + 1) = std::sqrt(lambda);
  for (Eigen::Index j = 0; j <= p; ++j) {
    z(n + p + j, j) = std::sqrt(tau);
    rhs(n + p + j) = std::sqrt(tau) * base(j);
  }
  const Eigen::VectorXd beta = z.colPivHouseholderQr().solve(rhs);
  return {beta(0), beta.tail(p)};
}

struct OracleMetrics {
  long double rmse, mae, r2;
};

inline OracleMetrics oracle_metrics(const std::vector<double>& y, const std::vector<double>& y_hat) {
  long double sse = 0, sae = 0, sum = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const long double e = static_cast<long double>(y[i]) - y_hat[i];
    sse += e * e;
    sae += e < 0 ? -e : e;
    sum += y[i];
  }
  const long double n = static_cast<long double>(y.size());
  const long double mean = sum / n;
  long double sst = 0;
  for (double v : y) sst += (v - mean) * (v - mean);
  return {std::sqrt(sse / n), sae / n, sst == 0 ? 0.0L : 1.0L - sse / sst};
}

/// Page-Hinkley written out directly from its definition.
struct OraclePH {
  double delta, lambda;
  std::uint64_t n = 0;
  double mean = 0.0, m = 0.0, m_min = 0.0;
  std::uint64_t alarm_at = 0;

  /// Returns alarm_at (0 while quiet).
  std::uint64_t push(double e) {
    ++n;
    mean += (e - mean) / static_cast<double>(n);
    m += e - mean - delta;
    m_min = std::min(m_min, m);
    if (alarm_at == 0 && m - m_min > lambda) alarm_at = n;
    return alarm_at;
  }
};

struct DriftTrialCounts {
  int detected = 0;       // alarm in (shift_at, shift_at + window]
  int early = 0;          // alarm before the shift in the detection stream
  int false_alarms = 0;   // any alarm over the long stationary stream
};

/// Monte-Carlo experiment: for each trial seed, one stream of |N(0,1)|
/// residuals that shifts by `shift` at step shift_at + 1, and one
/// stationary stream of `stationary` samples.
template <class Step>
DriftTrialCounts drift_trials(int trials, std::uint64_t shift_at, double shift, std::uint64_t window,
                              std::uint64_t stationary, Step make_detector) {
  DriftTrialCounts c;
  for (int t = 0; t < trials; ++t) {
    {
      Xorshift64Star rng(1000 + static_cast<std::uint64_t>(t));
      auto det = make_detector();
      std::uint64_t alarm = 0;
      for (std::uint64_t i = 1; i <= shift_at + window && alarm == 0; ++i) {
        const double e = std::abs(rng.normal() + (i > shift_at ? shift : 0.0));
        alarm = det(e);
      }
      if (alarm != 0 && alarm <= shift_at) ++c.early;
      if (alarm > shift_at) ++c.detected;
    }
    {
      Xorshift64Star rng(5000 + static_cast<std::uint64_t>(t));
      auto det = make_detector();
      std::uint64_t alarm = 0;
      for (std::uint64_t i = 1; i <= stationary && alarm == 0; ++i) alarm = det(std::abs(rng.normal()));
      if (alarm != 0) ++c.false_alarms;
    }
  }
  return c;
}

/// Plain BFS over an explicit edge list (directed pairs).
inline std::set<std::string> bfs_oracle(const std::string& start,
                                        const std::vector<std::pair<std::string, std::string>>& edges) {
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& [a, b] : edges) adj[a].push_back(b);
  std::set<std::string> seen{start};
  std::deque<std::string> q{start};
  while (!q.empty()) {
    const auto cur = q.front();
    q.pop_front();
    for (const auto& n : adj[cur]) {
      if (seen.insert(n).second) q.push_back(n);
    }
  }
  seen.erase(start);
  return seen;
}

/// Recursive DFS reachability.
inline bool dfs_reaches(const std::map<std::string, std::set<std::string>>& adj, const std::string& from,
                        const std::string& to, std::set<std::string>& visited) {
  if (from == to) return true;
  if (!visited.insert(from).second) return false;
  auto it = adj.find(from);
  if (it == adj.end()) return false;
  for (const auto& n : it->second) {
    if (dfs_reaches(adj, n, to, visited)) return true;
  }
  return false;
}

inline bool dfs_has_cycle(const std::map<std::string, std::set<std::string>>& adj) {
  for (const auto& [node, outs] : adj) {
    for (const auto& n : outs) {
      std::set<std::string> visited;
      if (dfs_reaches(adj, n, node, visited)) return true;
    }
  }
  return false;
}

inline double max_rel_error(const std::vector<double>& got, const std::vector<double>& want) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    num = std::max(num, std::abs(got[i] - want[i]));
    den = std::max(den, std::abs(want[i]));
  }
  return num / std::max(den, 1e-300);
}

}  // namespace mmgr::testing

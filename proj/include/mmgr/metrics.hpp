#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mmgr {

struct Metrics {
  double rmse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
  std::uint64_t n = 0;
};

/// rmse, mae and r2 of predictions against observations. r2 is 0 when the
/// target is constant and predicted exactly; a constant target predicted
/// with error is a validation (degenerate target) error.
Metrics compute_metrics(std::span<const double> y, std::span<const double> y_hat);

struct EvaluationReport {
  std::string id;
  std::string model_id;
  std::string snapshot_id;
  Metrics metrics;
  std::string evaluated_at;
};

struct SkipRecord {
  std::string snapshot_id;
  std::string reason;
};

struct AutoEvaluation {
  std::vector<EvaluationReport> reports;
  std::vector<SkipRecord> skipped;
};

struct SnapshotVerdict {
  std::string snapshot_id;
  double candidate_rmse = 0.0;
  std::optional<double> predecessor_rmse;
  double threshold = 0.0;
  bool pass = false;
};

struct GateVerdict {
  std::string id;
  std::string candidate;
  std::optional<std::string> predecessor;
  std::vector<SnapshotVerdict> snapshots;
  bool overall = false;
  double epsilon = 0.0;
  std::string created_at;
};

struct GateConfig {
  double epsilon = 0.0;
  /// Predecessor-free candidates pass iff rmse <= abs_factor * train rmse.
  double abs_factor = 1.05;
  /// Thresholds never drop below this, so exact fits are not failed on
  /// rounding noise.
  double abs_floor = 1e-9;
};

/// Per-snapshot decision. With a predecessor: pass iff
/// candidate <= max(predecessor * (1 + epsilon), abs_floor); without one:
/// pass iff candidate <= max(abs_factor * train_rmse, abs_floor).
SnapshotVerdict judge_snapshot(std::string snapshot_id, double candidate_rmse,
                               std::optional<double> predecessor_rmse, double train_rmse,
                               const GateConfig& config);

}  // namespace mmgr

#pragma once

#include "mmgr/artifact_store.hpp"
#include "mmgr/lineage.hpp"
#include "mmgr/registry.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mmgr {

struct PageHinkleyParams {
  double delta = 0.0;   // tolerated drift per sample
  double lambda = 0.0;  // alarm threshold
};

struct PageHinkleyState {
  std::uint64_t n = 0;
  double mean = 0.0;
  double ph_m = 0.0;
  double ph_min = 0.0;
  bool alarm = false;
  std::optional<std::uint64_t> alarm_at;

  friend bool operator==(const PageHinkleyState&, const PageHinkleyState&) = default;
};

/// One Page-Hinkley step on a residual magnitude e >= 0:
///   n' = n + 1
///   mean' = mean + (e - mean) / n'
///   ph_m' = ph_m + ((e - mean') - delta)
///   ph_min' = min(ph_min, ph_m')
///   alarm' = alarm || (ph_m' - ph_min' > lambda)
/// Evaluated in exactly this order. The alarm latches; alarm_at records n'.
PageHinkleyState page_hinkley_update(const PageHinkleyState& state, double e,
                                     const PageHinkleyParams& params);

struct DriftDefaults {
  double delta_factor = 0.25;  // delta = delta_factor * scale
  double lambda_factor = 20.0;  // lambda = lambda_factor * scale
  double min_scale = 1e-6;      // scale = max(train_residual_std, min_scale)
};

PageHinkleyParams default_drift_params(double train_residual_std, const DriftDefaults& d);

struct FeedbackEvent {
  std::string deployment_id;
  std::uint64_t seq = 0;
  std::map<std::string, double> features;
  double prediction = 0.0;
  double observation = 0.0;
  std::int64_t ts = 0;  // logical time (agent step)
  std::uint64_t epoch = 0;  // filled in by the monitor
};

struct DriftState {
  std::string deployment_id;
  std::uint64_t epoch = 0;  // incremented by every reset
  PageHinkleyParams params;
  PageHinkleyState ph;
  std::uint64_t last_seq = 0;
};

/// Selects events of the current epoch: either the closed range
/// [first, last] or the trailing `last_n` events.
struct FeedbackRange {
  std::optional<std::uint64_t> first;
  std::optional<std::uint64_t> last;
  std::optional<std::uint64_t> last_n;
};

class DriftMonitor {
 public:
  using AlarmListener = std::function<void(const std::string& deployment_id, std::uint64_t epoch,
                                           std::uint64_t alarm_at)>;

  DriftMonitor(Store& store, ArtifactStore& artifacts, LineageGraph& lineage, Registry& registry)
      : store_(store), artifacts_(artifacts), lineage_(lineage), registry_(registry) {}

  void set_alarm_listener(AlarmListener listener) { listener_ = std::move(listener); }

  /// Creates the zeroed state for a new deployment.
  void init_deployment(std::string_view deployment_id, const PageHinkleyParams& params);

  /// Appends the event and advances the statistic. Gaps or duplicates raise
  /// an ordering error and leave the log untouched. A newly latched alarm is
  /// recorded and delivered to the listener once, after commit.
  DriftState ingest_feedback(const FeedbackEvent& event);

  DriftState state(std::string_view deployment_id);
  DriftState reset_drift(std::string_view deployment_id);

  std::vector<FeedbackEvent> events(std::string_view deployment_id, const FeedbackRange& range);

  /// Materializes the selected events (model features + target) as a new
  /// snapshot of the training snapshot's dataset, linked newer_recording_of
  /// to the training snapshot.
  Snapshot feedback_to_snapshot(std::string_view deployment_id, const FeedbackRange& range);

 private:
  Store& store_;
  ArtifactStore& artifacts_;
  LineageGraph& lineage_;
  Registry& registry_;
  AlarmListener listener_;
};

}  // namespace mmgr

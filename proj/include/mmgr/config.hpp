#pragma once

#include "mmgr/drift_monitor.hpp"
#include "mmgr/metrics.hpp"
#include "mmgr/orchestrator.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace mmgr {

/// Service configuration. Files are `key = value` lines with `#` comments;
/// see docs/configuration.md for the keys.
struct Config {
  std::filesystem::path data_dir = "mmgr-data";
  std::string host = "127.0.0.1";
  int port = 8710;
  GateConfig gate;
  DriftDefaults drift;
  OrchestratorConfig jobs{.tuning_window = 500, .tune_lambda = 0.0, .tune_tau = 1.0, .worker_count = 1};

  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& file);
  /// MMGR_DATA_DIR, when set, replaces data_dir.
  void apply_environment();
};

}  // namespace mmgr

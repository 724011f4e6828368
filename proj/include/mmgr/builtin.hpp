#pragma once

// The built-in training algorithms and their hyperparameter encoding. A
// TrainingRun whose algorithm is listed here can be re-executed from its
// recorded tuple alone.

#include "mmgr/artifact_store.hpp"
#include "mmgr/linear_model.hpp"

#include <json.hpp>

#include <span>

#include <string>
#include <string_view>

namespace mmgr {

inline constexpr std::string_view kOlsAlgorithm = "builtin.ols";
inline constexpr std::string_view kTuneAlgorithm = "builtin.tune";
inline constexpr std::string_view kRuntimeName = "mmgr-runtime";
inline constexpr std::string_view kRuntimeVersion = "1.0.0";

bool is_builtin(std::string_view algorithm);

/// Canonical hyperparameter text: sorted keys, compact, UTF-8.
std::string canonical_json(const nlohmann::json& value);
bool is_canonical_json(std::string_view text);

std::string ols_hyperparameters(std::span<const std::string> features, std::string_view target,
                                double lambda);
std::string tune_hyperparameters(std::string_view base_artifact_hash, double lambda, double tau);

/// Runs a built-in algorithm on `table`; the tune algorithm loads its base
/// model from `artifacts` by hash.
LinearModel run_builtin(std::string_view algorithm, std::string_view hyperparameters,
                        const Table& table, double train_fraction, std::uint64_t seed,
                        ArtifactStore& artifacts);

}  // namespace mmgr

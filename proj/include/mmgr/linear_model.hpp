#pragma once

#include "mmgr/table.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mmgr {

/// Linear predictor y = intercept + sum_i coefficients[i] * x[feature_names[i]].
struct LinearModel {
  std::vector<std::string> feature_names;
  std::vector<double> coefficients;
  double intercept = 0.0;
  double train_residual_std = 0.0;
  std::string target_name;

  friend bool operator==(const LinearModel&, const LinearModel&) = default;
};

struct FitOptions {
  double ridge_lambda = 0.0;
  std::uint64_t seed = 0;
  double train_fraction = 1.0;
};

/// Row indices used for training: the rows are permuted with
/// shuffled_indices(n, seed), the first ceil(fraction * n) are kept and
/// returned in ascending order. fraction == 1 keeps every row.
std::vector<std::size_t> train_rows(std::size_t n, double fraction, std::uint64_t seed);

/// Ridge least squares on the training split; the intercept is never
/// penalized. Singular systems at lambda == 0 raise a validation error.
LinearModel fit(const Table& table, std::span<const std::string> feature_names,
                std::string_view target_name, const FitOptions& options);

/// Proximal refit: keeps base's feature set and solves
/// (Z'Z + D) beta = Z'y + tau * beta_base, where Z carries a leading column
/// of ones and D = diag(tau, lambda + tau, ..., lambda + tau).
/// tau == 0 is exactly fit() with the same lambda.
LinearModel tune(const LinearModel& base, const Table& table, double ridge_lambda, double tau,
                 std::uint64_t seed = 0, double train_fraction = 1.0);

double predict(const LinearModel& model, std::span<const double> x);
double predict(const LinearModel& model, const std::map<std::string, double>& row);
std::vector<double> predict(const LinearModel& model, const Table& table);

/// "MFLM" v1 byte layout, see docs/formats.md.
std::string serialize(const LinearModel& model);
LinearModel deserialize(std::string_view bytes);

/// Solves the symmetric positive definite system a x = b in place by an
/// unpivoted Cholesky factorization (row-major n x n). Returns false when a
/// pivot falls below 1e-11 times the original diagonal entry.
bool cholesky_solve(std::vector<double>& a, std::vector<double>& b, std::size_t n);

}  // namespace mmgr

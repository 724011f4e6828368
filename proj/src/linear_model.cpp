#include "mmgr/linear_model.hpp"

#include "mmgr/bytes.hpp"
#include "mmgr/error.hpp"
#include "mmgr/prng.hpp"

#include <algorithm>
#include <cmath>

namespace mmgr {

namespace {

constexpr std::string_view kModelMagic = "MFLM";
constexpr std::uint16_t kModelVersion = 1;
constexpr double kPivotTolerance = 1e-11;

struct NormalSystem {
  std::size_t dim = 0;          // 1 + feature count; index 0 is the intercept
  std::vector<double> a;        // row-major dim x dim
  std::vector<double> b;
};

std::vector<const std::vector<double>*> feature_columns(const Table& table,
                                                        std::span<const std::string> names) {
  std::vector<const std::vector<double>*> cols;
  Json missing = Json::array();
  for (const auto& n : names) {
    const Column* c = table.find(n);
    if (!c) {
      missing.push_back(n);
      continue;
    }
    if (c->type != ColumnType::Float) {
      fail(ErrorCode::schema, "feature column is not numeric: " + n, Json{{"column", n}});
    }
    cols.push_back(&c->numbers);
  }
  if (!missing.empty()) {
    fail(ErrorCode::schema, "missing columns: " + missing.dump(), Json{{"missing", missing}});
  }
  return cols;
}

void check_finite(const std::vector<double>& values, std::string_view column) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      fail(ErrorCode::validation, "non-finite value in column " + std::string(column),
           Json{{"column", column}});
    }
  }
}

// Accumulates Z'Z and Z'y over `rows` in ascending row order, Z = [1 | X].
NormalSystem accumulate(const std::vector<const std::vector<double>*>& cols, const std::vector<double>& y,
                        const std::vector<std::size_t>& rows) {
  NormalSystem sys;
  sys.dim = cols.size() + 1;
  sys.a.assign(sys.dim * sys.dim, 0.0);
  sys.b.assign(sys.dim, 0.0);
  std::vector<double> z(sys.dim);
  for (std::size_t r : rows) {
    z[0] = 1.0;
    for (std::size_t j = 0; j < cols.size(); ++j) z[j + 1] = (*cols[j])[r];
    for (std::size_t i = 0; i < sys.dim; ++i) {
      for (std::size_t j = 0; j <= i; ++j) sys.a[i * sys.dim + j] += z[i] * z[j];
      sys.b[i] += z[i] * y[r];
    }
  }
  for (std::size_t i = 0; i < sys.dim; ++i) {
    for (std::size_t j = i + 1; j < sys.dim; ++j) sys.a[i * sys.dim + j] = sys.a[j * sys.dim + i];
  }
  return sys;
}

double residual_std(const LinearModel& m, const std::vector<const std::vector<double>*>& cols,
                    const std::vector<double>& y, const std::vector<std::size_t>& rows) {
  if (rows.size() < 2) return 0.0;
  std::vector<double> res;
  res.reserve(rows.size());
  double mean = 0.0;
  for (std::size_t r : rows) {
    double yhat = m.intercept;
    for (std::size_t j = 0; j < cols.size(); ++j) yhat += m.coefficients[j] * (*cols[j])[r];
    res.push_back(y[r] - yhat);
    mean += res.back();
  }
  mean /= static_cast<double>(rows.size());
  double ss = 0.0;
  for (double e : res) ss += (e - mean) * (e - mean);
  return std::sqrt(ss / static_cast<double>(rows.size() - 1));
}

// Shared by fit and tune so that tune with tau == 0 solves the identical system.
LinearModel solve(const Table& table, std::vector<std::string> features, std::string target, double lambda,
                  double tau, const LinearModel* base, std::uint64_t seed, double train_fraction) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail(ErrorCode::validation, "ridge lambda must be >= 0");
  if (!(tau >= 0.0) || !std::isfinite(tau)) fail(ErrorCode::validation, "shrink tau must be >= 0");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    fail(ErrorCode::validation, "train_fraction must lie in (0, 1]");
  }
  std::vector<std::string> wanted = features;
  wanted.push_back(target);
  auto cols = feature_columns(table, wanted);
  const std::vector<double>& y = *cols.back();
  cols.pop_back();
  for (std::size_t j = 0; j < cols.size(); ++j) check_finite(*cols[j], features[j]);
  check_finite(y, target);

  const auto rows = train_rows(table.row_count, train_fraction, seed);
  if (rows.size() < features.size() + 1) {
    fail(ErrorCode::validation,
         "insufficient rows: " + std::to_string(rows.size()) + " training rows for " +
             std::to_string(features.size()) + " features",
         Json{{"rows", rows.size()}, {"required", features.size() + 1}});
  }

  NormalSystem sys = accumulate(cols, y, rows);
  for (std::size_t i = 1; i < sys.dim; ++i) sys.a[i * sys.dim + i] += lambda;
  if (tau != 0.0) {
    for (std::size_t i = 0; i < sys.dim; ++i) sys.a[i * sys.dim + i] += tau;
    sys.b[0] += tau * base->intercept;
    for (std::size_t i = 1; i < sys.dim; ++i) sys.b[i] += tau * base->coefficients[i - 1];
  }
  if (!cholesky_solve(sys.a, sys.b, sys.dim)) {
    fail(ErrorCode::validation,
         "normal equations are singular (collinear or constant features); use a ridge lambda > 0",
         Json{{"reason", "singular"}, {"lambda", lambda}});
  }

  LinearModel m;
  m.feature_names = std::move(features);
  m.target_name = std::move(target);
  m.intercept = sys.b[0];
  m.coefficients.assign(sys.b.begin() + 1, sys.b.end());
  for (double c : sys.b) {
    if (!std::isfinite(c)) fail(ErrorCode::validation, "fit produced non-finite coefficients");
  }
  m.train_residual_std = residual_std(m, cols, y, rows);
  return m;
}

}  // namespace

std::vector<std::size_t> train_rows(std::size_t n, double fraction, std::uint64_t seed) {
  std::vector<std::size_t> rows;
  if (fraction >= 1.0) {
    rows.resize(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    return rows;
  }
  auto perm = shuffled_indices(n, seed);
  auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  k = std::min(k, n);
  rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(rows.begin(), rows.end());
  return rows;
}

bool cholesky_solve(std::vector<double>& a, std::vector<double>& b, std::size_t n) {
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = a[i * n + i];
  // Lower factor overwrites the lower triangle of a.
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > kPivotTolerance * diag[j]) || !(d > 0.0)) return false;
    const double l = std::sqrt(d);
    a[j * n + j] = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / l;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
    b[i] = s / a[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[k * n + i] * b[k];
    b[i] = s / a[i * n + i];
  }
  return true;
}

LinearModel fit(const Table& table, std::span<const std::string> feature_names, std::string_view target_name,
                const FitOptions& options) {
  std::vector<std::string> features(feature_names.begin(), feature_names.end());
  for (const auto& f : features) {
    if (f == target_name) fail(ErrorCode::validation, "target column listed as a feature: " + f);
  }
  return solve(table, std::move(features), std::string(target_name), options.ridge_lambda, 0.0, nullptr,
               options.seed, options.train_fraction);
}

LinearModel tune(const LinearModel& base, const Table& table, double ridge_lambda, double tau, std::uint64_t seed,
                 double train_fraction) {
  if (base.coefficients.size() != base.feature_names.size()) {
    fail(ErrorCode::validation, "base model coefficient count does not match its features");
  }
  return solve(table, base.feature_names, base.target_name, ridge_lambda, tau, &base, seed, train_fraction);
}

double predict(const LinearModel& model, std::span<const double> x) {
  if (x.size() != model.coefficients.size()) {
    fail(ErrorCode::schema, "expected " + std::to_string(model.coefficients.size()) + " feature values");
  }
  double y = model.intercept;
  for (std::size_t i = 0; i < x.size(); ++i) y += model.coefficients[i] * x[i];
  return y;
}

double predict(const LinearModel& model, const std::map<std::string, double>& row) {
  std::vector<double> x;
  x.reserve(model.feature_names.size());
  for (const auto& f : model.feature_names) {
    auto it = row.find(f);
    if (it == row.end()) {
      fail(ErrorCode::schema, "missing feature: " + f, Json{{"missing", Json::array({f})}});
    }
    x.push_back(it->second);
  }
  return predict(model, x);
}

std::vector<double> predict(const LinearModel& model, const Table& table) {
  auto cols = feature_columns(table, model.feature_names);
  std::vector<double> out(table.row_count);
  std::vector<double> x(cols.size());
  for (std::size_t r = 0; r < table.row_count; ++r) {
    for (std::size_t j = 0; j < cols.size(); ++j) x[j] = (*cols[j])[r];
    out[r] = predict(model, x);
  }
  return out;
}

std::string serialize(const LinearModel& model) {
  bytes::Writer w;
  w.raw(kModelMagic);
  w.u16(kModelVersion);
  w.str(model.target_name);
  w.u32(static_cast<std::uint32_t>(model.feature_names.size()));
  for (const auto& f : model.feature_names) w.str(f);
  for (double c : model.coefficients) w.f64(c);
  w.f64(model.intercept);
  w.f64(model.train_residual_std);
  return w.take();
}

LinearModel deserialize(std::string_view bytes_in) {
  bytes::Reader r(bytes_in, "model artifact");
  if (bytes_in.size() < 4 || r.raw(4) != kModelMagic) {
    fail(ErrorCode::unsupported, "not a built-in linear model artifact (bad magic)");
  }
  if (r.u16() != kModelVersion) fail(ErrorCode::unsupported, "unknown model artifact version");
  LinearModel m;
  m.target_name = r.str();
  const std::uint32_t p = r.u32();
  if (p > bytes_in.size()) fail(ErrorCode::corruption, "model artifact: implausible feature count");
  m.feature_names.resize(p);
  for (auto& f : m.feature_names) f = r.str();
  m.coefficients.resize(p);
  for (auto& c : m.coefficients) c = r.f64();
  m.intercept = r.f64();
  m.train_residual_std = r.f64();
  r.expect_end();
  return m;
}

}  // namespace mmgr

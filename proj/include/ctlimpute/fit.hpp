#ifndef CTLIMPUTE_FIT_HPP
#define CTLIMPUTE_FIT_HPP

/** @file
 * Ordinary least-squares estimation of scalar AR(p), vector AR(1) and
 * linear-regression models, plus uncorrected forward prediction.
 *
 * Estimation goes through the rank-revealing least_squares() so that
 * degenerate windows (constant data, collinear covariates) still return
 * the minimum-norm coefficients with the deficiency reported.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctlimpute/error.hpp"
#include "ctlimpute/linalg.hpp"

namespace ctlimpute {

struct FitOptions {
  bool intercept = true;
  LinalgTolerances tolerances{};
};

/// Diagnostics of the least-squares estimation.
struct FitInfo {
  std::size_t equations = 0;
  std::size_t unknowns = 0;
  std::size_t rank = 0;
  double residual_norm = 0.0;
  bool rank_deficient() const noexcept { return rank < unknowns; }
};

/// x_n = sum_j a[j-1] x_{n-j} + b.
struct ArModel {
  std::vector<double> a;
  double b = 0.0;
  FitInfo info{};

  std::size_t order() const noexcept { return a.size(); }
};

/// x_n = A x_{n-1} + b.
struct VarModel {
  Matrix A;
  Vector b;
  FitInfo info{};

  std::size_t dim() const noexcept { return b.size(); }
};

/// y_n = A x_n + b, with m responses and k covariates. The scalar-response
/// case is m = 1.
struct RegModel {
  Matrix A;
  Vector b;
  FitInfo info{};

  std::size_t responses() const noexcept { return A.rows(); }
  std::size_t covariates() const noexcept { return A.cols(); }
  Vector predict(const Vector& x) const { return mat_vec(A, x) + b; }
};

namespace detail {

inline bool usable(std::span<const bool> mask, std::size_t i) {
  return mask.empty() || mask[i];
}

}  // namespace detail

/// Fits AR(p) on every position n whose value and p lags are all usable.
/// `mask` (same length as `values`, or empty for "all usable") marks the
/// entries that may take part in estimation.
inline ArModel fit_ar_masked(std::span<const double> values, std::span<const bool> mask,
                             std::size_t p, const FitOptions& opts = {}) {
  if (p < 1) throw usage_error("AR order must be at least 1");
  if (!mask.empty() && mask.size() != values.size()) {
    throw usage_error("fit mask length does not match the window");
  }
  std::vector<std::size_t> targets;
  for (std::size_t n = p; n < values.size(); ++n) {
    bool ok = true;
    for (std::size_t j = 0; j <= p && ok; ++j) ok = detail::usable(mask, n - j);
    if (ok) targets.push_back(n);
  }
  const std::size_t unknowns = p + (opts.intercept ? 1 : 0);
  if (targets.size() < p + 1) {
    throw data_error("fit window too short for AR(" + std::to_string(p) + "): " +
                     std::to_string(targets.size()) + " usable equations, need at least " +
                     std::to_string(p + 1));
  }
  Matrix x(targets.size(), unknowns);
  Vector y(targets.size());
  for (std::size_t r = 0; r < targets.size(); ++r) {
    const std::size_t n = targets[r];
    for (std::size_t j = 1; j <= p; ++j) x(r, j - 1) = values[n - j];
    if (opts.intercept) x(r, p) = 1.0;
    y[r] = values[n];
  }
  const auto ls = least_squares(x, y, opts.tolerances);
  ArModel m;
  m.a.assign(ls.coeffs.begin(), ls.coeffs.begin() + static_cast<std::ptrdiff_t>(p));
  m.b = opts.intercept ? ls.coeffs[p] : 0.0;
  m.info = {targets.size(), unknowns, ls.rank, ls.residual_norm};
  return m;
}

/// Fits AR(p) on a contiguous, fully observed window of length n_0.
/// Requires n_0 - p >= p + 1.
inline ArModel fit_ar_scalar(std::span<const double> window, std::size_t p,
                             const FitOptions& opts = {}) {
  if (p < 1) throw usage_error("AR order must be at least 1");
  if (window.size() < 2 * p + 1) {
    throw data_error("fit window too short for AR(" + std::to_string(p) + "): length " +
                     std::to_string(window.size()) + ", need at least " +
                     std::to_string(2 * p + 1));
  }
  return fit_ar_masked(window, {}, p, opts);
}

/// Fits x_n = A x_{n-1} + b over consecutive pairs where both ends are
/// usable. Each output row is an independent least-squares problem sharing
/// the same design matrix.
inline VarModel fit_var1_masked(std::span<const Vector> window, std::span<const bool> mask,
                                const FitOptions& opts = {}) {
  if (window.empty()) throw data_error("empty fit window");
  if (!mask.empty() && mask.size() != window.size()) {
    throw usage_error("fit mask length does not match the window");
  }
  const std::size_t k = window.front().size();
  std::vector<std::size_t> targets;
  for (std::size_t n = 1; n < window.size(); ++n) {
    if (detail::usable(mask, n) && detail::usable(mask, n - 1)) targets.push_back(n);
  }
  const std::size_t unknowns = k + (opts.intercept ? 1 : 0);
  if (targets.size() < k + 1) {
    throw data_error("fit window too short for VAR(1) of dimension " + std::to_string(k) +
                     ": " + std::to_string(targets.size()) + " usable pairs, need at least " +
                     std::to_string(k + 1));
  }
  Matrix x(targets.size(), unknowns);
  for (std::size_t r = 0; r < targets.size(); ++r) {
    const Vector& prev = window[targets[r] - 1];
    if (prev.size() != k || window[targets[r]].size() != k) {
      throw data_error("inconsistent observation dimension in fit window");
    }
    for (std::size_t j = 0; j < k; ++j) x(r, j) = prev[j];
    if (opts.intercept) x(r, k) = 1.0;
  }
  VarModel m{Matrix(k, k), Vector(k), {}};
  m.info = {targets.size(), unknowns, unknowns, 0.0};
  double rss = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    Vector y(targets.size());
    for (std::size_t r = 0; r < targets.size(); ++r) y[r] = window[targets[r]][i];
    const auto ls = least_squares(x, y, opts.tolerances);
    for (std::size_t j = 0; j < k; ++j) m.A(i, j) = ls.coeffs[j];
    m.b[i] = opts.intercept ? ls.coeffs[k] : 0.0;
    m.info.rank = std::min(m.info.rank, ls.rank);
    rss += ls.residual_norm * ls.residual_norm;
  }
  m.info.residual_norm = std::sqrt(rss);
  return m;
}

/// VAR(1) on a contiguous fully observed window; needs n_0 >= k + 2.
inline VarModel fit_var1(std::span<const Vector> window, const FitOptions& opts = {}) {
  if (window.empty()) throw data_error("empty fit window");
  const std::size_t k = window.front().size();
  if (window.size() < k + 2) {
    throw data_error("fit window too short for VAR(1) of dimension " + std::to_string(k) +
                     ": length " + std::to_string(window.size()) + ", need at least " +
                     std::to_string(k + 2));
  }
  return fit_var1_masked(window, {}, opts);
}

/// Least-squares regression of responses on covariates over paired rows.
inline RegModel fit_regression(std::span<const Vector> y_window,
                               std::span<const Vector> x_window,
                               const FitOptions& opts = {}) {
  if (y_window.size() != x_window.size()) {
    throw data_error("response and covariate windows differ in length");
  }
  if (y_window.empty()) throw data_error("empty fit window");
  const std::size_t m = y_window.front().size();
  const std::size_t k = x_window.front().size();
  const std::size_t unknowns = k + (opts.intercept ? 1 : 0);
  if (y_window.size() < k + 2) {
    throw data_error("fit window too short for regression on " + std::to_string(k) +
                     " covariates: length " + std::to_string(y_window.size()) +
                     ", need at least " + std::to_string(k + 2));
  }
  Matrix x(y_window.size(), unknowns);
  for (std::size_t r = 0; r < x_window.size(); ++r) {
    if (x_window[r].size() != k || y_window[r].size() != m) {
      throw data_error("inconsistent dimension in regression window");
    }
    for (std::size_t j = 0; j < k; ++j) x(r, j) = x_window[r][j];
    if (opts.intercept) x(r, k) = 1.0;
  }
  RegModel model{Matrix(m, k), Vector(m), {}};
  model.info = {y_window.size(), unknowns, unknowns, 0.0};
  double rss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    Vector y(y_window.size());
    for (std::size_t r = 0; r < y_window.size(); ++r) y[r] = y_window[r][i];
    const auto ls = least_squares(x, y, opts.tolerances);
    for (std::size_t j = 0; j < k; ++j) model.A(i, j) = ls.coeffs[j];
    model.b[i] = opts.intercept ? ls.coeffs[k] : 0.0;
    model.info.rank = std::min(model.info.rank, ls.rank);
    rss += ls.residual_norm * ls.residual_norm;
  }
  model.info.residual_norm = std::sqrt(rss);
  return model;
}

/// Rolls the AR recursion `steps` times from the last p seeds (oldest
/// first). Returns the predicted values only.
inline std::vector<double> predict_forward(const ArModel& model, std::span<const double> seeds,
                                           std::size_t steps) {
  const std::size_t p = model.order();
  if (seeds.size() != p) {
    throw usage_error("AR(" + std::to_string(p) + ") prediction needs " + std::to_string(p) +
                      " seeds, got " + std::to_string(seeds.size()));
  }
  std::vector<double> hist(seeds.begin(), seeds.end());
  std::vector<double> out;
  out.reserve(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    double v = model.b;
    for (std::size_t j = 1; j <= p; ++j) v += model.a[j - 1] * hist[hist.size() - j];
    hist.push_back(v);
    out.push_back(v);
  }
  return out;
}

inline std::vector<Vector> predict_forward(const VarModel& model, const Vector& seed,
                                           std::size_t steps) {
  if (seed.size() != model.dim()) throw usage_error("VAR prediction seed has wrong dimension");
  std::vector<Vector> out;
  out.reserve(steps);
  Vector x = seed;
  for (std::size_t s = 0; s < steps; ++s) {
    x = mat_vec(model.A, x) + model.b;
    out.push_back(x);
  }
  return out;
}

/// Regression predictions for each covariate row; a missing row is an error.
inline std::vector<Vector> predict_forward(const RegModel& model,
                                           std::span<const std::optional<Vector>> covariates) {
  std::vector<Vector> out;
  out.reserve(covariates.size());
  for (std::size_t i = 0; i < covariates.size(); ++i) {
    if (!covariates[i]) {
      throw data_error("missing covariate for regression step " + std::to_string(i + 1));
    }
    out.push_back(model.predict(*covariates[i]));
  }
  return out;
}

}  // namespace ctlimpute

#endif  // CTLIMPUTE_FIT_HPP

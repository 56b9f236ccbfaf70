#ifndef CTLIMPUTE_CONTROL_HPP
#define CTLIMPUTE_CONTROL_HPP

/** @file
 * Minimum-energy control correction for gaps with a known endpoint.
 *
 * The fitted recursion is rolled across the gap with an additive control
 * u_n at every step from the first missing index through the anchor. The
 * controls minimize sum ||u_n||^2 subject to the recursion landing on the
 * observed anchor value. Because the dynamics are linear, the endpoint
 * shift is a weighted sum of the controls,
 *
 *     x~_N - x^_N = sum_j W_j u(j),     j = steps before the anchor,
 *
 * so the minimizer is u(j) = W_j^T lambda with (sum_j W_j W_j^T) lambda =
 * x_bar - x^_N. For scalar AR(p) the W_j are the impulse-response weights
 * psi_j; for VAR(1) they are the matrix powers A^j.
 *
 * `CoeffMode::paper` swaps the scalar weights for the reference gamma
 * recurrence (which is not the impulse response once p >= 2) and, for the
 * vector model, additionally evaluates the reference per-step norm formula
 * as a diagnostic. Paper-mode results are for comparison; only exact mode
 * guarantees that the anchor is reached.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctlimpute/error.hpp"
#include "ctlimpute/fit.hpp"
#include "ctlimpute/linalg.hpp"
#include "ctlimpute/series.hpp"

namespace ctlimpute {

enum class CoeffMode { exact, paper };

inline const char* to_string(CoeffMode m) { return m == CoeffMode::exact ? "exact" : "paper"; }

inline CoeffMode parse_mode(const std::string& s) {
  if (s == "exact") return CoeffMode::exact;
  if (s == "paper") return CoeffMode::paper;
  throw usage_error("unknown mode '" + s + "' (expected exact or paper)");
}

/// Weights are rejected once any magnitude exceeds this.
inline constexpr double kWeightOverflow = 1e150;

/// w[j] multiplies the control applied j steps before the anchor.
struct WeightSequence {
  std::vector<double> w;
  CoeffMode mode = CoeffMode::exact;

  std::size_t size() const noexcept { return w.size(); }
  double sum_squares() const {
    double s = 0.0;
    for (double v : w) s += v * v;
    return s;
  }
};

namespace detail {

inline void guard_weight(double v, std::size_t j) {
  if (!std::isfinite(v) || std::abs(v) > kWeightOverflow) {
    throw numerical_error("weight " + std::to_string(j) +
                          " exceeds 1e150; the fitted recursion is too explosive for this gap length");
  }
}

}  // namespace detail

/// psi_0 = 1, psi_j = sum_{i=1}^{min(j,p)} a_i psi_{j-i}.
inline WeightSequence impulse_weights_exact(const ArModel& model, std::size_t m) {
  if (m < 1) throw usage_error("weight length must be at least 1");
  const std::size_t p = model.order();
  WeightSequence ws{std::vector<double>(m, 0.0), CoeffMode::exact};
  ws.w[0] = 1.0;
  for (std::size_t j = 1; j < m; ++j) {
    double s = 0.0;
    for (std::size_t i = 1; i <= std::min(j, p); ++i) s += model.a[i - 1] * ws.w[j - i];
    detail::guard_weight(s, j);
    ws.w[j] = s;
  }
  return ws;
}

/// The reference gamma recurrence, gamma_n = sum_k alpha_{n,k}:
///
///     alpha_{0,1} = 1,  alpha_{k-1,k} = 1,  alpha_{n,k} = 0 for n < k-1,
///     alpha_{n,k} = a_k gamma_{n-k}        (n >= k, k < p),
///     alpha_{n,p} = a_p gamma_{n-p} + 1    (n >= p, p >= 2).
///
/// For p = 1 the "+1" row is not applied, which reduces gamma to a^n.
inline WeightSequence gamma_weights_paper(const ArModel& model, std::size_t m) {
  if (m < 1) throw usage_error("weight length must be at least 1");
  const std::size_t p = model.order();
  WeightSequence ws{std::vector<double>(m, 0.0), CoeffMode::paper};
  for (std::size_t n = 0; n < m; ++n) {
    double gamma = 0.0;
    for (std::size_t k = 1; k <= p; ++k) {
      double alpha = 0.0;
      if (n + 1 == k) {
        alpha = 1.0;
      } else if (n >= k) {
        alpha = model.a[k - 1] * ws.w[n - k];
        if (k == p && p >= 2) alpha += 1.0;
      }
      gamma += alpha;
    }
    detail::guard_weight(gamma, n);
    ws.w[n] = gamma;
  }
  return ws;
}

struct ScalarControls {
  double multiplier = 0.0;
  /// Chronological: controls[i] applies i steps after the first control,
  /// so controls.back() is the control at the anchor.
  std::vector<double> controls;
};

/// c* = delta / sum w_j^2, control j steps before the anchor = c* w_j.
inline ScalarControls solve_controls_scalar(const WeightSequence& weights, double delta) {
  const double ss = weights.sum_squares();
  if (!(ss > 0.0)) throw numerical_error("unreachable terminal constraint: all weights are zero");
  ScalarControls out;
  out.multiplier = delta / ss;
  const std::size_t m = weights.size();
  out.controls.resize(m);
  for (std::size_t i = 0; i < m; ++i) out.controls[i] = out.multiplier * weights.w[m - 1 - i];
  return out;
}

struct VarControls {
  Vector multiplier;
  /// Chronological, as in ScalarControls.
  std::vector<Vector> controls;
  /// The reachability Gram matrix was numerically singular.
  bool rank_deficient = false;
};

/// Relative tolerance used to declare a terminal constraint unreachable.
inline constexpr double kReachabilityTolerance = 1e-8;

/// Gram/Lagrange solve. powers[j] = A^j for j = 0..m-1.
inline VarControls solve_controls_var(std::span<const Matrix> powers, const Vector& delta) {
  if (powers.empty()) throw usage_error("at least one control step is required");
  const std::size_t k = delta.size();
  Matrix gram(k, k);
  for (const auto& p : powers) {
    if (p.rows() != k || p.cols() != k) throw numerical_error("matrix power has wrong shape");
    gram += outer_gram(p);
  }
  const auto sol = solve_spd(gram, delta);
  const std::size_t m = powers.size();
  VarControls out{sol.x, std::vector<Vector>(m), sol.singular};
  Vector reached(k);
  for (std::size_t i = 0; i < m; ++i) {
    const Matrix& p = powers[m - 1 - i];
    out.controls[i] = mat_vec(p.transpose(), out.multiplier);
    reached += mat_vec(p, out.controls[i]);
  }
  if (norm2(reached - delta) > kReachabilityTolerance * (1.0 + norm2(delta))) {
    throw numerical_error("unreachable terminal constraint: target lies outside the reachable subspace");
  }
  return out;
}

/// Result of filling one gap.
struct ControlSolution {
  CoeffMode mode = CoeffMode::exact;
  /// False for an open gap: no anchor, so all controls are zero.
  bool constrained = true;
  /// 1-based index of the first control (the first missing index).
  std::size_t first_index = 0;
  /// Controls for first_index..anchor (chronological). The last entry is
  /// the control at the anchor; the anchor keeps its observed value.
  std::vector<Vector> controls;
  /// c* (length 1) for scalar paths, lambda for the vector path.
  Vector multiplier;
  /// Uncorrected predictions x^ at first_index..anchor.
  std::vector<Vector> predicted;
  /// Corrected values x~ at the missing indices only.
  std::vector<Vector> imputed;
  /// x_bar - x^_N (empty for an open gap).
  Vector delta;
  /// ||rolled x~_N - x_bar||.
  double terminal_residual = 0.0;
  bool rank_deficient = false;
  /// Scalar weights actually used, most-recent-first.
  std::vector<double> weights;
  /// Paper mode, scalar: max_j |gamma_j - psi_j|.
  std::optional<double> weight_discrepancy;
  /// Paper mode, vector: per-step norms from the reference formula next
  /// to the norms of the exact controls (chronological).
  std::vector<double> paper_norms;
  std::vector<double> exact_norms;

  double objective() const {
    double s = 0.0;
    for (const auto& u : controls) s += dot(u, u);
    return s;
  }
};

namespace detail {

inline std::vector<Vector> as_vectors(std::span<const double> v) {
  std::vector<Vector> out;
  out.reserve(v.size());
  for (double x : v) out.push_back(Vector{x});
  return out;
}

}  // namespace detail

/// Fills a gap under a scalar AR(p) model. `seeds` are the p values before
/// the gap, oldest first; they are shared by the predicted and corrected
/// trajectories.
inline ControlSolution impute_gap_ar(const ArModel& model, const GapSegment& gap,
                                     std::span<const double> seeds,
                                     CoeffMode mode = CoeffMode::exact) {
  const std::size_t p = model.order();
  if (seeds.size() != p) {
    throw usage_error("AR(" + std::to_string(p) + ") needs " + std::to_string(p) +
                      " seeds, got " + std::to_string(seeds.size()));
  }
  ControlSolution sol;
  sol.mode = mode;
  sol.first_index = gap.gap_start;
  const std::size_t len = gap.length();

  if (gap.open()) {
    const auto path = predict_forward(model, seeds, len);
    sol.constrained = false;
    sol.predicted = detail::as_vectors(path);
    sol.imputed = sol.predicted;
    sol.controls.assign(len, Vector{0.0});
    sol.multiplier = Vector{0.0};
    return sol;
  }
  if (gap.anchor_value->size() != 1) throw usage_error("scalar AR path needs a scalar anchor");
  const double anchor = (*gap.anchor_value)[0];
  const std::size_t m = len + 1;
  const auto path = predict_forward(model, seeds, m);
  const double delta = anchor - path.back();

  const auto weights =
      mode == CoeffMode::exact ? impulse_weights_exact(model, m) : gamma_weights_paper(model, m);
  const auto ctl = solve_controls_scalar(weights, delta);

  std::vector<double> hist(seeds.begin(), seeds.end());
  for (std::size_t i = 0; i < m; ++i) {
    double v = model.b + ctl.controls[i];
    for (std::size_t j = 1; j <= p; ++j) v += model.a[j - 1] * hist[hist.size() - j];
    hist.push_back(v);
  }
  const std::vector<double> rolled(hist.begin() + static_cast<std::ptrdiff_t>(p), hist.end());

  sol.controls = detail::as_vectors(ctl.controls);
  sol.multiplier = Vector{ctl.multiplier};
  sol.predicted = detail::as_vectors(path);
  sol.imputed = detail::as_vectors(std::span<const double>(rolled).first(len));
  sol.delta = Vector{delta};
  sol.terminal_residual = std::abs(rolled.back() - anchor);
  sol.weights = weights.w;
  if (mode == CoeffMode::paper) {
    const auto psi = impulse_weights_exact(model, m);
    double worst = 0.0;
    for (std::size_t j = 0; j < m; ++j) worst = std::max(worst, std::abs(psi.w[j] - weights.w[j]));
    sol.weight_discrepancy = worst;
  }
  return sol;
}

namespace detail {

inline std::vector<Matrix> checked_powers(const Matrix& a, std::size_t m) {
  auto powers = mat_pow_table(a, m - 1);
  for (std::size_t j = 0; j < powers.size(); ++j) {
    const auto e = powers[j].entries();
    const bool finite = std::all_of(e.begin(), e.end(), [](double v) { return std::isfinite(v); });
    if (!finite || powers[j].max_abs() > kWeightOverflow) {
      throw numerical_error("A^" + std::to_string(j) +
                            " exceeds 1e150; the fitted recursion is too explosive for this gap length");
    }
  }
  return powers;
}

/// Per-step norms from the reference closed form: with S_j the sum of all
/// entries of A^j and C_j the sum of squared column sums of A^j,
/// ||u(j)|| = ||delta|| / (sum_l C_l) * S_j. Chronological order.
inline std::vector<double> reference_var_norms(std::span<const Matrix> powers, const Vector& delta) {
  const std::size_t m = powers.size();
  double denom = 0.0;
  std::vector<double> total(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    const Matrix& p = powers[j];
    for (std::size_t c = 0; c < p.cols(); ++c) {
      double colsum = 0.0;
      for (std::size_t r = 0; r < p.rows(); ++r) colsum += p(r, c);
      denom += colsum * colsum;
      total[j] += colsum;
    }
  }
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = norm2(delta) / denom * total[m - 1 - i];
  return out;
}

}  // namespace detail

/// Fills a gap under a VAR(1) model seeded by the value just before it.
/// Paper mode keeps the exact controls and adds the reference norm formula
/// as a diagnostic.
inline ControlSolution impute_gap_var(const VarModel& model, const GapSegment& gap, const Vector& seed,
                                      CoeffMode mode = CoeffMode::exact) {
  const std::size_t k = model.dim();
  if (seed.size() != k) throw usage_error("VAR seed has wrong dimension");
  ControlSolution sol;
  sol.mode = mode;
  sol.first_index = gap.gap_start;
  const std::size_t len = gap.length();

  if (gap.open()) {
    sol.constrained = false;
    sol.predicted = predict_forward(model, seed, len);
    sol.imputed = sol.predicted;
    sol.controls.assign(len, Vector(k));
    sol.multiplier = Vector(k);
    return sol;
  }
  const Vector& anchor = *gap.anchor_value;
  if (anchor.size() != k) throw usage_error("VAR anchor has wrong dimension");
  const std::size_t m = len + 1;
  sol.predicted = predict_forward(model, seed, m);
  sol.delta = anchor - sol.predicted.back();

  const auto powers = detail::checked_powers(model.A, m);
  auto ctl = solve_controls_var(powers, sol.delta);

  Vector x = seed;
  for (std::size_t i = 0; i < m; ++i) {
    x = mat_vec(model.A, x) + model.b + ctl.controls[i];
    if (i < len) sol.imputed.push_back(x);
  }
  sol.terminal_residual = norm2(x - anchor);
  sol.controls = std::move(ctl.controls);
  sol.multiplier = std::move(ctl.multiplier);
  sol.rank_deficient = ctl.rank_deficient;
  if (mode == CoeffMode::paper) {
    sol.paper_norms = detail::reference_var_norms(powers, sol.delta);
    for (const auto& u : sol.controls) sol.exact_norms.push_back(norm2(u));
  }
  return sol;
}

/// Fills missing responses of a regression model. `covariates` holds the
/// covariate rows for indices gap_start-1 .. anchor_index (gap length + 2
/// rows; gap length + 1 for an open gap), all of which must be present.
///
/// The corrected path starts from the regression prediction at
/// gap_start-1 and adds b_n = A(x_n - x_{n-1}) plus a uniform correction
/// (y_bar - y^_N) / (N - n_0) per step.
inline ControlSolution impute_gap_regression(const RegModel& model, const GapSegment& gap,
                                             std::span<const std::optional<Vector>> covariates) {
  const std::size_t len = gap.length();
  const std::size_t steps = gap.open() ? len : len + 1;
  if (covariates.size() != steps + 1) {
    throw usage_error("regression gap needs " + std::to_string(steps + 1) + " covariate rows");
  }
  for (std::size_t i = 0; i < covariates.size(); ++i) {
    if (!covariates[i]) {
      throw data_error("missing covariate row at index " +
                       std::to_string(gap.gap_start - 1 + i));
    }
  }
  const auto yhat = predict_forward(model, covariates);
  const std::size_t mdim = model.responses();

  ControlSolution sol;
  sol.first_index = gap.gap_start;
  sol.predicted.assign(yhat.begin() + 1, yhat.end());
  if (gap.open()) {
    sol.constrained = false;
    sol.imputed = sol.predicted;
    sol.controls.assign(len, Vector(mdim));
    sol.multiplier = Vector(mdim);
    return sol;
  }
  const Vector& anchor = *gap.anchor_value;
  if (anchor.size() != mdim) throw usage_error("regression anchor has wrong dimension");
  sol.delta = anchor - yhat.back();
  const Vector step = (1.0 / static_cast<double>(steps)) * sol.delta;

  Vector y = yhat.front();
  for (std::size_t i = 1; i <= steps; ++i) {
    const Vector drift = mat_vec(model.A, *covariates[i] - *covariates[i - 1]);
    y = y + drift + step;
    if (i <= len) sol.imputed.push_back(y);
  }
  sol.terminal_residual = norm2(y - anchor);
  sol.controls.assign(steps, step);
  sol.multiplier = step;
  sol.weights.assign(steps, 1.0);
  return sol;
}

}  // namespace ctlimpute

#endif  // CTLIMPUTE_CONTROL_HPP

#ifndef CTLIMPUTE_ORACLE_HPP
#define CTLIMPUTE_ORACLE_HPP

/** @file
 * Brute-force verifier for control solutions and a seeded generator of
 * random gap instances.
 *
 * The oracle never touches the weight recurrences or the SPD solver used by
 * the control code. Constraint coefficients come from direct simulation
 * (a unit kick for each step) or from naive repeated multiplication, and
 * the stationarity system is solved with the SVD least-squares routine.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctlimpute/control.hpp"
#include "ctlimpute/fit.hpp"
#include "ctlimpute/linalg.hpp"
#include "ctlimpute/series.hpp"

namespace ctlimpute::oracle {

/// min sum ||u_n||^2  subject to  sum C_n u_n = target.
struct ConstrainedProblem {
  /// One matrix per control step, chronological (last entry acts on the
  /// control at the anchor). Scalar problems use 1x1 matrices.
  std::vector<Matrix> steps;
  Vector target;
};

struct OracleResult {
  std::vector<Vector> controls;
  Vector multiplier;
  double objective = 0.0;
  double constraint_residual = 0.0;
  bool feasible = true;
};

/// Reachability residual above this (relative to 1 + ||target||) means
/// the problem is infeasible.
inline constexpr double kInfeasibleTolerance = 1e-8;

inline Vector apply_constraint(const ConstrainedProblem& prob, std::span<const Vector> controls) {
  if (controls.size() != prob.steps.size()) {
    throw usage_error("control count does not match the problem's step count");
  }
  Vector reached(prob.target.size());
  for (std::size_t n = 0; n < controls.size(); ++n) reached += mat_vec(prob.steps[n], controls[n]);
  return reached;
}

/// Stationarity: u_n = C_n^T lambda with (sum C_n C_n^T) lambda = target,
/// lambda taken minimum-norm when the system is singular.
inline OracleResult kkt_solve(const ConstrainedProblem& prob) {
  if (prob.steps.empty()) throw usage_error("constrained problem needs at least one step");
  const std::size_t k = prob.target.size();
  Matrix gram(k, k);
  for (const auto& c : prob.steps) {
    if (c.rows() != k) throw usage_error("step matrix rows must match the target dimension");
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        double s = 0.0;
        for (std::size_t l = 0; l < c.cols(); ++l) s += c(i, l) * c(j, l);
        gram(i, j) += s;
      }
  }
  OracleResult res;
  res.multiplier = least_squares(gram, prob.target).coeffs;
  for (const auto& c : prob.steps) {
    res.controls.push_back(mat_vec(c.transpose(), res.multiplier));
    res.objective += dot(res.controls.back(), res.controls.back());
  }
  res.constraint_residual = norm2(apply_constraint(prob, res.controls) - prob.target);
  res.feasible = res.constraint_residual <= kInfeasibleTolerance * (1.0 + norm2(prob.target));
  return res;
}

/// Scalar AR(p) problem over m steps. Coefficients are the anchor response
/// to a unit kick at each step, found by simulating the recursion.
inline ConstrainedProblem ar_problem(const ArModel& model, std::span<const double> seeds,
                                     double anchor, std::size_t m) {
  const std::size_t p = model.order();
  const auto simulate = [&](std::span<const double> start, double intercept,
                            std::optional<std::size_t> kick) {
    std::vector<double> h(start.begin(), start.end());
    for (std::size_t i = 0; i < m; ++i) {
      double v = intercept + (kick && *kick == i ? 1.0 : 0.0);
      for (std::size_t j = 0; j < p; ++j) v += model.a[j] * h[h.size() - 1 - j];
      h.push_back(v);
    }
    return h.back();
  };
  ConstrainedProblem prob;
  const std::vector<double> zeros(p, 0.0);
  for (std::size_t i = 0; i < m; ++i) prob.steps.push_back(Matrix{{simulate(zeros, 0.0, i)}});
  prob.target = Vector{anchor - simulate(seeds, model.b, std::nullopt)};
  return prob;
}

/// VAR(1) problem over m steps; step i carries A^(m-1-i), built by naive
/// repeated multiplication.
inline ConstrainedProblem var_problem(const VarModel& model, const Vector& seed,
                                      const Vector& anchor, std::size_t m) {
  const std::size_t k = model.dim();
  ConstrainedProblem prob;
  prob.steps.assign(m, Matrix::identity(k));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t rep = 0; rep + 1 + i < m; ++rep) {
      Matrix next(k, k);
      for (std::size_t r = 0; r < k; ++r)
        for (std::size_t c = 0; c < k; ++c)
          for (std::size_t l = 0; l < k; ++l) next(r, c) += model.A(r, l) * prob.steps[i](l, c);
      prob.steps[i] = next;
    }
  }
  Vector x = seed;
  for (std::size_t i = 0; i < m; ++i) {
    Vector y(k);
    for (std::size_t r = 0; r < k; ++r) {
      y[r] = model.b[r];
      for (std::size_t c = 0; c < k; ++c) y[r] += model.A(r, c) * x[c];
    }
    x = y;
  }
  prob.target = anchor - x;
  return prob;
}

/// Regression problem: every step adds its control directly to the
/// response, so each C_n is the identity. `covariates` as for
/// impute_gap_regression.
inline ConstrainedProblem regression_problem(const RegModel& model,
                                             std::span<const std::optional<Vector>> covariates,
                                             const Vector& anchor) {
  const std::size_t mdim = model.responses();
  ConstrainedProblem prob;
  prob.steps.assign(covariates.size() - 1, Matrix::identity(mdim));
  Vector yhat(mdim);
  const Vector& xn = *covariates.back();
  for (std::size_t r = 0; r < mdim; ++r) {
    yhat[r] = model.b[r];
    for (std::size_t c = 0; c < model.covariates(); ++c) yhat[r] += model.A(r, c) * xn[c];
  }
  prob.target = anchor - yhat;
  return prob;
}

struct Verdict {
  double objective = 0.0;
  double oracle_objective = 0.0;
  double objective_error = 0.0;
  double constraint_residual = 0.0;
  bool feasible = true;
  bool pass = false;
};

inline constexpr double kCertifyTolerance = 1e-9;

/// Pass iff the solution's objective matches the oracle optimum and its
/// constraint residual is small, both to 1e-9 relative.
inline Verdict certify(const ControlSolution& sol, const ConstrainedProblem& prob) {
  Verdict v;
  const auto best = kkt_solve(prob);
  v.feasible = best.feasible;
  v.objective = sol.objective();
  v.oracle_objective = best.objective;
  v.objective_error = std::abs(v.objective - v.oracle_objective);
  v.constraint_residual = norm2(apply_constraint(prob, sol.controls) - prob.target);
  const bool obj_ok =
      v.objective_error <= kCertifyTolerance * std::max(v.oracle_objective, std::numeric_limits<double>::min());
  const bool cons_ok = v.constraint_residual <= kCertifyTolerance * (1.0 + norm2(prob.target));
  v.pass = best.feasible && obj_ok && cons_ok;
  return v;
}

/// SplitMix64. Fixed so that instances can be regenerated from a seed by
/// any implementation of the same algorithm.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  /// Uniform on [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
  /// Uniform integer on [lo, hi].
  std::size_t between(std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(next() % (hi - lo + 1));
  }

 private:
  std::uint64_t state_;
};

struct ScalarLimits {
  std::size_t max_order = 3;
  std::size_t max_gap = 12;
  double max_coeff = 1.2;
  std::size_t max_prefix = 40;
};

struct VarLimits {
  std::size_t min_dim = 2;
  std::size_t max_dim = 3;
  std::size_t max_gap = 10;
  double max_coeff = 0.9;
  std::size_t max_prefix = 40;
};

struct RegressionLimits {
  std::size_t max_covariates = 3;
  std::size_t max_gap = 12;
  std::size_t max_prefix = 40;
};

/// Simulated values never exceed this magnitude; draws that do are redone.
inline constexpr double kInstanceMagnitude = 1e6;

struct ArInstance {
  std::uint64_t seed = 0;
  Series series;
  ArModel truth;
  std::size_t prefix = 0;
  std::size_t gap_length = 0;
};

struct VarInstance {
  std::uint64_t seed = 0;
  Series series;
  VarModel truth;
  std::size_t prefix = 0;
  std::size_t gap_length = 0;
};

struct RegressionInstance {
  std::uint64_t seed = 0;
  Series responses;
  Series covariates;
  RegModel truth;
  std::size_t prefix = 0;
  std::size_t gap_length = 0;
};

namespace detail {

/// Builds a series with one gap at prefix+1..prefix+gap from a full path.
inline Series with_gap(const std::vector<Vector>& full, std::size_t prefix, std::size_t gap) {
  std::vector<std::optional<Vector>> pts(full.begin(), full.end());
  for (std::size_t i = prefix; i < prefix + gap; ++i) pts[i].reset();
  return make_series(std::move(pts));
}

inline bool within_magnitude(const std::vector<Vector>& path) {
  for (const auto& v : path)
    if (!v.all_finite() || norm_inf(v) > kInstanceMagnitude) return false;
  return true;
}

}  // namespace detail

/// Random scalar AR(p) series with exactly one gap followed by its anchor
/// and 0..2 further observations. Noise is uniform on [-1, 1].
inline ArInstance random_instance(std::uint64_t seed, const ScalarLimits& lim) {
  SplitMix64 rng(seed);
  const std::size_t p = rng.between(1, lim.max_order);
  const std::size_t prefix = rng.between(std::min(2 * p + 1, lim.max_prefix), lim.max_prefix);
  const std::size_t gap = rng.between(1, lim.max_gap);
  const std::size_t tail = rng.between(0, 2);
  const std::size_t total = prefix + gap + 1 + tail;
  double shrink = 1.0;
  for (int attempt = 0;; ++attempt) {
    if (attempt >= 20) shrink *= 0.8;
    ArModel truth;
    for (std::size_t j = 0; j < p; ++j) truth.a.push_back(shrink * rng.uniform(-lim.max_coeff, lim.max_coeff));
    truth.b = rng.uniform(-2.0, 2.0);
    std::vector<Vector> path;
    std::vector<double> h;
    for (std::size_t i = 0; i < total; ++i) {
      double v = 0.0;
      if (i < p) {
        v = rng.uniform(-5.0, 5.0);
      } else {
        v = truth.b + rng.uniform(-1.0, 1.0);
        for (std::size_t j = 0; j < p; ++j) v += truth.a[j] * h[h.size() - 1 - j];
      }
      h.push_back(v);
      path.push_back(Vector{v});
    }
    if (!detail::within_magnitude(path)) continue;
    return {seed, detail::with_gap(path, prefix, gap), truth, prefix, gap};
  }
}

/// Random VAR(1) series of dimension min_dim..max_dim with one gap.
inline VarInstance random_instance(std::uint64_t seed, const VarLimits& lim) {
  SplitMix64 rng(seed);
  const std::size_t k = rng.between(lim.min_dim, lim.max_dim);
  const std::size_t prefix = rng.between(std::min(k + 3, lim.max_prefix), lim.max_prefix);
  const std::size_t gap = rng.between(1, lim.max_gap);
  const std::size_t tail = rng.between(0, 2);
  const std::size_t total = prefix + gap + 1 + tail;
  double shrink = 1.0;
  for (int attempt = 0;; ++attempt) {
    if (attempt >= 20) shrink *= 0.8;
    VarModel truth{Matrix(k, k), Vector(k), {}};
    for (std::size_t r = 0; r < k; ++r) {
      for (std::size_t c = 0; c < k; ++c) truth.A(r, c) = shrink * rng.uniform(-lim.max_coeff, lim.max_coeff);
      truth.b[r] = rng.uniform(-2.0, 2.0);
    }
    std::vector<Vector> path;
    Vector x(k);
    for (std::size_t r = 0; r < k; ++r) x[r] = rng.uniform(-5.0, 5.0);
    path.push_back(x);
    for (std::size_t i = 1; i < total; ++i) {
      Vector noise(k);
      for (std::size_t r = 0; r < k; ++r) noise[r] = rng.uniform(-1.0, 1.0);
      x = mat_vec(truth.A, x) + truth.b + noise;
      path.push_back(x);
    }
    if (!detail::within_magnitude(path)) continue;
    return {seed, detail::with_gap(path, prefix, gap), truth, prefix, gap};
  }
}

/// Random regression instance: scalar response, 1..max_covariates random
/// walk covariates observed everywhere, response missing on one gap.
inline RegressionInstance random_instance(std::uint64_t seed, const RegressionLimits& lim) {
  SplitMix64 rng(seed);
  const std::size_t k = rng.between(1, lim.max_covariates);
  const std::size_t prefix = rng.between(std::min(k + 3, lim.max_prefix), lim.max_prefix);
  const std::size_t gap = rng.between(1, lim.max_gap);
  const std::size_t total = prefix + gap + 1 + rng.between(0, 2);
  RegModel truth{Matrix(1, k), Vector(1), {}};
  for (std::size_t c = 0; c < k; ++c) truth.A(0, c) = rng.uniform(-3.0, 3.0);
  truth.b[0] = rng.uniform(-5.0, 5.0);
  std::vector<Vector> xs, ys;
  Vector x(k);
  for (std::size_t i = 0; i < total; ++i) {
    for (std::size_t c = 0; c < k; ++c) x[c] += rng.uniform(-1.0, 1.0);
    xs.push_back(x);
    ys.push_back(truth.predict(x) + Vector{rng.uniform(-1.0, 1.0)});
  }
  std::vector<std::optional<Vector>> cov(xs.begin(), xs.end());
  return {seed, detail::with_gap(ys, prefix, gap), make_series(std::move(cov)), truth, prefix, gap};
}

}  // namespace ctlimpute::oracle

#endif  // CTLIMPUTE_ORACLE_HPP

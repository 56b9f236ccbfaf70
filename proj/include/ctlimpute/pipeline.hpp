#ifndef CTLIMPUTE_PIPELINE_HPP
#define CTLIMPUTE_PIPELINE_HPP

/** @file
 * End-to-end commands: parse -> segment -> fit -> solve -> write, model
 * fitting alone, weight tables, and randomized oracle verification.
 *
 * Everything here is a pure function of its inputs, so identical
 * configuration and input bytes give identical output bytes.
 */

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctlimpute/control.hpp"
#include "ctlimpute/error.hpp"
#include "ctlimpute/fit.hpp"
#include "ctlimpute/oracle.hpp"
#include "ctlimpute/report.hpp"
#include "ctlimpute/series.hpp"

namespace ctlimpute {

enum class ModelKind { ar, var, regression };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::ar: return "ar";
    case ModelKind::var: return "var";
    case ModelKind::regression: return "regression";
  }
  return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "ar") return ModelKind::ar;
  if (s == "var") return ModelKind::var;
  if (s == "regression") return ModelKind::regression;
  throw usage_error("unknown model '" + s + "' (expected ar, var or regression)");
}

struct RunConfig {
  ModelKind model = ModelKind::ar;
  std::size_t order = 1;
  CoeffMode mode = CoeffMode::exact;
  CsvOptions csv{};
  std::vector<std::string> covariates;
  bool refit_per_gap = false;
  bool allow_open_gap = false;
  bool intercept = true;
  int precision = 6;
};

struct ImputeOutput {
  std::string csv;
  report::Json report;
};

/// Relative bar on |x~_N - x_bar| for exact-mode solutions.
inline constexpr double kFeasibilityTolerance = 1e-9;

namespace detail {

inline void check_config(const RunConfig& cfg) {
  if (cfg.order < 1) throw usage_error("--order must be at least 1");
  if (cfg.precision < 1 || cfg.precision > 17) throw usage_error("--precision must be within 1..17");
  if (cfg.model == ModelKind::var && cfg.order != 1) {
    throw usage_error("the var model supports order 1 only");
  }
  if (cfg.model == ModelKind::regression && cfg.covariates.empty()) {
    throw usage_error("the regression model needs --covariates");
  }
}

inline std::string gap_label(const GapSegment& g) {
  return "gap " + std::to_string(g.gap_start) + ".." + std::to_string(g.gap_end);
}

inline std::string hint_for(const Error& e) {
  const std::string what = e.what();
  if (what.find("too short") != std::string::npos) {
    return " (hint: lower --order, or pass --refit-per-gap to fit on every observed value before the gap)";
  }
  if (what.find("unreachable") != std::string::npos) {
    return " (hint: the fitted dynamics cannot reach the anchor; try a different --order or model)";
  }
  if (what.find("1e150") != std::string::npos) {
    return " (hint: the fitted model is explosive; try a lower --order or a shorter gap)";
  }
  return "";
}

/// Re-throws with the gap position and a remediation hint attached.
template <class F>
auto with_gap_context(const GapSegment& g, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.kind(), gap_label(g) + ": " + e.what() + hint_for(e));
  }
}

inline std::vector<bool> observed_mask(const Series& s, std::size_t upto) {
  std::vector<bool> m(upto);
  for (std::size_t i = 0; i < upto; ++i) m[i] = s.points()[i].has_value();
  return m;
}

/// std::vector<bool> has no contiguous storage; copy into a span-able buffer.
struct Mask {
  std::unique_ptr<bool[]> data;
  std::size_t size = 0;
  explicit Mask(const std::vector<bool>& m) : data(new bool[m.size()]), size(m.size()) {
    for (std::size_t i = 0; i < size; ++i) data[i] = m[i];
  }
  std::span<const bool> view() const { return {data.get(), size}; }
};

inline std::vector<Vector> filled_vectors(const std::vector<std::optional<Vector>>& pts,
                                          std::size_t dim) {
  std::vector<Vector> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(p ? *p : Vector(dim));
  return out;
}

inline report::Json header_json(const RunConfig& cfg, const Series& s, const GapLayout& layout) {
  report::Json r;
  r["schema_version"] = report::kSchemaVersion;
  r["command"] = "impute";
  r["model_kind"] = to_string(cfg.model);
  r["order"] = cfg.order;
  r["mode"] = to_string(cfg.mode);
  r["fit_policy"] = cfg.refit_per_gap ? "refit-per-gap" : "leading-prefix";
  r["seed_policy"] = "gaps filled left to right; earlier imputed values may seed later gaps";
  r["intercept"] = cfg.intercept;
  r["series_length"] = s.length();
  r["dimension"] = s.dim();
  r["prefix_length"] = layout.prefix_length;
  r["gap_count"] = layout.gaps.size();
  return r;
}

inline std::string prefix_too_short(std::size_t n0, std::size_t need) {
  return "leading observed run has length " + std::to_string(n0) + ", fit window too short (need " +
         std::to_string(need) + ")";
}

inline ImputeOutput impute_ar(const Series& s, const RunConfig& cfg) {
  if (s.dim() != 1) throw usage_error("the ar model needs exactly one value column (use --columns)");
  const std::size_t p = cfg.order;
  const auto layout = detect_gaps(s, p, cfg.allow_open_gap);
  const FitOptions fopts{cfg.intercept, {}};
  auto rep = header_json(cfg, s, layout);
  report::Json warnings = report::Json::array();

  std::vector<double> filled = s.scalar_values();
  const auto mask = Mask(observed_mask(s, s.length()));

  std::optional<ArModel> shared;
  if (!cfg.refit_per_gap && !layout.gaps.empty()) {
    if (layout.prefix_length < 2 * p + 1) {
      throw data_error(prefix_too_short(layout.prefix_length, 2 * p + 1) +
                       " (hint: lower --order, or pass --refit-per-gap)");
    }
    shared = fit_ar_scalar(std::span<const double>(filled).first(layout.prefix_length), p, fopts);
    rep["model"] = report::to_json(*shared);
    rep["model"]["window"] = {1, layout.prefix_length};
    if (shared->info.rank_deficient()) warnings.push_back("rank-deficient fit; minimum-norm coefficients used");
  } else {
    rep["model"] = nullptr;
  }

  report::Json gaps = report::Json::array();
  for (const auto& gap : layout.gaps) {
    const ArModel model = shared ? *shared : with_gap_context(gap, [&] {
      return fit_ar_masked(std::span<const double>(filled).first(gap.gap_start - 1),
                           mask.view().first(gap.gap_start - 1), p, fopts);
    });
    std::vector<double> seeds;
    for (auto idx : gap.seed_indices) seeds.push_back(filled[idx - 1]);
    const auto sol = with_gap_context(gap, [&] { return impute_gap_ar(model, gap, seeds, cfg.mode); });
    for (std::size_t i = 0; i < sol.imputed.size(); ++i) filled[gap.gap_start - 1 + i] = sol.imputed[i][0];

    std::vector<Vector> seed_vecs;
    for (double v : seeds) seed_vecs.push_back(Vector{v});
    auto entry = report::gap_json(gap, sol, seed_vecs, true);
    if (!shared) entry["model"] = report::to_json(model);
    if (sol.constrained) {
      const auto prob = oracle::ar_problem(model, seeds, (*gap.anchor_value)[0], gap.length() + 1);
      entry["oracle"] = report::to_json(oracle::certify(sol, prob));
      if (cfg.mode == CoeffMode::paper) {
        entry["diagnostics"]["weight_sum_index_set"] = "first missing index through anchor";
      }
    } else {
      warnings.push_back(gap_label(gap) + " has no anchor; filled with the uncorrected prediction");
    }
    if (gap.seeds_include_imputed) warnings.push_back(gap_label(gap) + " is seeded by imputed values");
    gaps.push_back(std::move(entry));
  }
  rep["gaps"] = std::move(gaps);
  rep["warnings"] = std::move(warnings);

  std::vector<std::optional<Vector>> out(s.length());
  for (std::size_t i = 0; i < s.length(); ++i)
    if (!s.points()[i]) out[i] = Vector{filled[i]};
  return {write_csv(s, out, cfg.precision), std::move(rep)};
}

inline ImputeOutput impute_var(const Series& s, const RunConfig& cfg) {
  const auto layout = detect_gaps(s, 1, cfg.allow_open_gap);
  const FitOptions fopts{cfg.intercept, {}};
  const std::size_t k = s.dim();
  auto rep = header_json(cfg, s, layout);
  report::Json warnings = report::Json::array();

  auto filled = filled_vectors(s.points(), k);
  const auto mask = Mask(observed_mask(s, s.length()));

  std::optional<VarModel> shared;
  if (!cfg.refit_per_gap && !layout.gaps.empty()) {
    if (layout.prefix_length < k + 2) {
      throw data_error(prefix_too_short(layout.prefix_length, k + 2) + " (hint: pass --refit-per-gap)");
    }
    shared = fit_var1(std::span<const Vector>(filled).first(layout.prefix_length), fopts);
    rep["model"] = report::to_json(*shared);
    rep["model"]["window"] = {1, layout.prefix_length};
    if (shared->info.rank_deficient()) warnings.push_back("rank-deficient fit; minimum-norm coefficients used");
  } else {
    rep["model"] = nullptr;
  }

  report::Json gaps = report::Json::array();
  for (const auto& gap : layout.gaps) {
    const VarModel model = shared ? *shared : with_gap_context(gap, [&] {
      return fit_var1_masked(std::span<const Vector>(filled).first(gap.gap_start - 1),
                             mask.view().first(gap.gap_start - 1), fopts);
    });
    const Vector seed = filled[gap.seed_indices.front() - 1];
    const auto sol = with_gap_context(gap, [&] { return impute_gap_var(model, gap, seed, cfg.mode); });
    for (std::size_t i = 0; i < sol.imputed.size(); ++i) filled[gap.gap_start - 1 + i] = sol.imputed[i];

    auto entry = report::gap_json(gap, sol, std::vector<Vector>{seed}, false);
    if (!shared) entry["model"] = report::to_json(model);
    if (sol.constrained) {
      const auto prob = oracle::var_problem(model, seed, *gap.anchor_value, gap.length() + 1);
      entry["oracle"] = report::to_json(oracle::certify(sol, prob));
      if (sol.rank_deficient) warnings.push_back(gap_label(gap) + ": rank-deficient reachability");
    } else {
      warnings.push_back(gap_label(gap) + " has no anchor; filled with the uncorrected prediction");
    }
    if (gap.seeds_include_imputed) warnings.push_back(gap_label(gap) + " is seeded by imputed values");
    gaps.push_back(std::move(entry));
  }
  rep["gaps"] = std::move(gaps);
  rep["warnings"] = std::move(warnings);

  std::vector<std::optional<Vector>> out(s.length());
  for (std::size_t i = 0; i < s.length(); ++i)
    if (!s.points()[i]) out[i] = filled[i];
  return {write_csv(s, out, cfg.precision), std::move(rep)};
}

/// Rows usable for regression fitting: response and covariates observed,
/// restricted to indices < limit (0-based exclusive) and, in prefix mode,
/// to the leading observed run.
inline RegModel fit_regression_rows(const Series& y, const Series& x, std::size_t limit,
                                    const FitOptions& fopts) {
  std::vector<Vector> ys, xs;
  for (std::size_t i = 0; i < limit; ++i) {
    if (y.points()[i] && x.points()[i]) {
      ys.push_back(*y.points()[i]);
      xs.push_back(*x.points()[i]);
    }
  }
  if (ys.empty()) throw data_error("fit window too short for regression: no usable rows");
  return fit_regression(ys, xs, fopts);
}

inline ImputeOutput impute_regression(const Series& y, std::string_view text, const RunConfig& cfg) {
  CsvOptions xopts = cfg.csv;
  xopts.value_columns = cfg.covariates;
  const Series x = parse_csv(text, xopts);
  const auto layout = detect_gaps(y, 1, cfg.allow_open_gap);
  const FitOptions fopts{cfg.intercept, {}};
  const bool scalar = y.dim() == 1;
  auto rep = header_json(cfg, y, layout);
  rep["covariates"] = cfg.covariates;
  report::Json warnings = report::Json::array();

  std::optional<RegModel> shared;
  if (!cfg.refit_per_gap && !layout.gaps.empty()) {
    shared = fit_regression_rows(y, x, layout.prefix_length, fopts);
    rep["model"] = report::to_json(*shared);
    rep["model"]["window"] = {1, layout.prefix_length};
    if (shared->info.rank_deficient()) warnings.push_back("rank-deficient fit; minimum-norm coefficients used");
  } else {
    rep["model"] = nullptr;
  }

  std::vector<std::optional<Vector>> out(y.length());
  report::Json gaps = report::Json::array();
  for (const auto& gap : layout.gaps) {
    const RegModel model =
        shared ? *shared : with_gap_context(gap, [&] { return fit_regression_rows(y, x, gap.gap_start - 1, fopts); });
    const std::size_t last = gap.open() ? gap.gap_end : gap.anchor_index;
    const std::span<const std::optional<Vector>> cov(x.points().data() + (gap.gap_start - 2),
                                                     last - gap.gap_start + 2);
    const auto sol = with_gap_context(gap, [&] { return impute_gap_regression(model, gap, cov); });
    for (std::size_t i = 0; i < sol.imputed.size(); ++i) out[gap.gap_start - 1 + i] = sol.imputed[i];

    auto entry = report::gap_json(gap, sol, std::vector<Vector>{model.predict(*cov.front())}, scalar);
    entry["seed_is_regression_prediction"] = true;
    if (!shared) entry["model"] = report::to_json(model);
    if (sol.constrained) {
      entry["oracle"] = report::to_json(oracle::certify(sol, oracle::regression_problem(model, cov, *gap.anchor_value)));
    } else {
      warnings.push_back(gap_label(gap) + " has no anchor; filled with the uncorrected prediction");
    }
    gaps.push_back(std::move(entry));
  }
  rep["gaps"] = std::move(gaps);
  rep["warnings"] = std::move(warnings);
  return {write_csv(y, out, cfg.precision), std::move(rep)};
}

}  // namespace detail

/// Fills every gap of the input and returns the output table and report.
inline ImputeOutput run_impute(std::string_view text, const RunConfig& cfg) {
  detail::check_config(cfg);
  const Series s = parse_csv(text, cfg.csv);
  switch (cfg.model) {
    case ModelKind::ar: return detail::impute_ar(s, cfg);
    case ModelKind::var: return detail::impute_var(s, cfg);
    case ModelKind::regression: return detail::impute_regression(s, text, cfg);
  }
  throw usage_error("unknown model kind");
}

/// Fits the configured model on the leading observed run (the whole series
/// when it has no gaps) and reports the coefficients.
inline report::Json run_fit(std::string_view text, const RunConfig& cfg) {
  detail::check_config(cfg);
  const Series s = parse_csv(text, cfg.csv);
  std::size_t n0 = 0;
  while (n0 < s.length() && s.points()[n0]) ++n0;
  if (n0 == 0) throw data_error("series starts with a missing value; nothing to fit");
  const FitOptions fopts{cfg.intercept, {}};
  report::Json r;
  r["schema_version"] = report::kSchemaVersion;
  r["command"] = "fit";
  switch (cfg.model) {
    case ModelKind::ar: {
      if (s.dim() != 1) throw usage_error("the ar model needs exactly one value column (use --columns)");
      const auto vals = s.scalar_values();
      r["model"] = report::to_json(fit_ar_scalar(std::span<const double>(vals).first(n0), cfg.order, fopts));
      break;
    }
    case ModelKind::var: {
      const auto vals = detail::filled_vectors(s.points(), s.dim());
      r["model"] = report::to_json(fit_var1(std::span<const Vector>(vals).first(n0), fopts));
      break;
    }
    case ModelKind::regression: {
      CsvOptions xopts = cfg.csv;
      xopts.value_columns = cfg.covariates;
      const Series x = parse_csv(text, xopts);
      r["model"] = report::to_json(detail::fit_regression_rows(s, x, n0, fopts));
      break;
    }
  }
  r["model"]["window"] = {1, n0};
  return r;
}

/// Side-by-side impulse-response and reference gamma weights.
inline std::string run_coeffs(const ArModel& model, std::size_t length, int precision = 17) {
  const auto psi = impulse_weights_exact(model, length);
  const auto gamma = gamma_weights_paper(model, length);
  std::string out = "j,psi,gamma,diff\n";
  for (std::size_t j = 0; j < length; ++j) {
    out += std::to_string(j) + "," + format_number(psi.w[j], precision) + "," +
           format_number(gamma.w[j], precision) + "," + format_number(gamma.w[j] - psi.w[j], precision) + "\n";
  }
  return out;
}

struct VerifyConfig {
  ModelKind model = ModelKind::ar;
  std::uint64_t seed = 1;
  std::size_t cases = 1000;
  CoeffMode mode = CoeffMode::exact;
  /// Perturbs the first control of every solution before certification.
  bool inject_fault = false;
  oracle::ScalarLimits scalar_limits{};
  oracle::VarLimits var_limits{};
  oracle::RegressionLimits regression_limits{};
};

struct VerifyCase {
  std::uint64_t seed = 0;
  std::size_t order = 0;
  std::size_t dim = 0;
  std::size_t gap_length = 0;
  oracle::Verdict verdict;
  double terminal_residual = 0.0;
  double anchor_norm = 0.0;
  bool feasible = false;
  bool pass = false;
  std::string error;
};

struct VerifySummary {
  std::vector<VerifyCase> cases;
  std::size_t passed = 0;
  std::size_t terminal_feasible = 0;
  double worst_objective_error = 0.0;  // relative
  double worst_constraint_residual = 0.0;
  double worst_terminal_residual = 0.0;  // relative to 1 + |x_bar|
  bool all_passed() const noexcept { return passed == cases.size(); }
};

namespace detail {

inline void finish_case(VerifyCase& c, ControlSolution& sol, const oracle::ConstrainedProblem& prob,
                        const Vector& anchor, bool inject_fault) {
  if (inject_fault) sol.controls.front()[0] += 0.1;
  c.verdict = oracle::certify(sol, prob);
  c.terminal_residual = sol.terminal_residual;
  c.anchor_norm = norm2(anchor);
  c.feasible = sol.terminal_residual <= kFeasibilityTolerance * (1.0 + c.anchor_norm);
  c.pass = c.verdict.pass;
}

/// Solves one random instance with its generating model (so the coefficient
/// bounds of the limits hold for the model under test) and certifies it.
inline VerifyCase verify_one(std::uint64_t seed, const VerifyConfig& cfg) {
  VerifyCase c;
  c.seed = seed;
  try {
    switch (cfg.model) {
      case ModelKind::ar: {
        const auto inst = oracle::random_instance(seed, cfg.scalar_limits);
        const std::size_t p = inst.truth.order();
        const auto layout = detect_gaps(inst.series, p);
        const auto& gap = layout.gaps.front();
        const auto vals = inst.series.scalar_values();
        const auto& model = inst.truth;
        std::vector<double> seeds;
        for (auto i : gap.seed_indices) seeds.push_back(vals[i - 1]);
        auto sol = impute_gap_ar(model, gap, seeds, cfg.mode);
        const auto prob = oracle::ar_problem(model, seeds, (*gap.anchor_value)[0], gap.length() + 1);
        c.order = p;
        c.dim = 1;
        c.gap_length = gap.length();
        finish_case(c, sol, prob, *gap.anchor_value, cfg.inject_fault);
        break;
      }
      case ModelKind::var: {
        const auto inst = oracle::random_instance(seed, cfg.var_limits);
        const auto layout = detect_gaps(inst.series, 1);
        const auto& gap = layout.gaps.front();
        const auto vals = filled_vectors(inst.series.points(), inst.series.dim());
        const auto& model = inst.truth;
        const Vector seed_value = vals[gap.gap_start - 2];
        auto sol = impute_gap_var(model, gap, seed_value, cfg.mode);
        const auto prob = oracle::var_problem(model, seed_value, *gap.anchor_value, gap.length() + 1);
        c.order = 1;
        c.dim = model.dim();
        c.gap_length = gap.length();
        finish_case(c, sol, prob, *gap.anchor_value, cfg.inject_fault);
        break;
      }
      case ModelKind::regression: {
        const auto inst = oracle::random_instance(seed, cfg.regression_limits);
        const auto layout = detect_gaps(inst.responses, 1);
        const auto& gap = layout.gaps.front();
        const auto& model = inst.truth;
        const std::span<const std::optional<Vector>> cov(inst.covariates.points().data() + (gap.gap_start - 2),
                                                         gap.length() + 2);
        auto sol = impute_gap_regression(model, gap, cov);
        const auto prob = oracle::regression_problem(model, cov, *gap.anchor_value);
        c.order = 1;
        c.dim = 1;
        c.gap_length = gap.length();
        finish_case(c, sol, prob, *gap.anchor_value, cfg.inject_fault);
        break;
      }
    }
  } catch (const Error& e) {
    c.pass = false;
    c.error = e.what();
  }
  return c;
}

}  // namespace detail

/// Certifies cfg.cases random instances with seeds cfg.seed, cfg.seed+1, ...
inline VerifySummary run_verify(const VerifyConfig& cfg) {
  VerifySummary s;
  s.cases.reserve(cfg.cases);
  for (std::size_t i = 0; i < cfg.cases; ++i) {
    auto c = detail::verify_one(cfg.seed + i, cfg);
    if (c.pass) ++s.passed;
    if (c.error.empty() && c.feasible) ++s.terminal_feasible;
    if (c.error.empty()) {
      const double rel = c.verdict.objective_error /
                         std::max(c.verdict.oracle_objective, std::numeric_limits<double>::min());
      s.worst_objective_error = std::max(s.worst_objective_error, rel);
      s.worst_constraint_residual = std::max(s.worst_constraint_residual, c.verdict.constraint_residual);
      s.worst_terminal_residual =
          std::max(s.worst_terminal_residual, c.terminal_residual / (1.0 + c.anchor_norm));
    }
    s.cases.push_back(std::move(c));
  }
  return s;
}

inline report::Json to_json(const VerifyCase& c, ModelKind kind) {
  report::Json j;
  j["seed"] = c.seed;
  j["model"] = to_string(kind);
  j["order"] = c.order;
  j["dimension"] = c.dim;
  j["gap_length"] = c.gap_length;
  j["objective"] = c.verdict.objective;
  j["oracle_objective"] = c.verdict.oracle_objective;
  j["objective_error"] = c.verdict.objective_error;
  j["constraint_residual"] = c.verdict.constraint_residual;
  j["terminal_residual"] = c.terminal_residual;
  j["terminal_feasible"] = c.feasible;
  j["pass"] = c.pass;
  if (!c.error.empty()) j["error"] = c.error;
  return j;
}

}  // namespace ctlimpute

#endif  // CTLIMPUTE_PIPELINE_HPP

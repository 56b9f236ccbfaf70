#ifndef CTLIMPUTE_REPORT_HPP
#define CTLIMPUTE_REPORT_HPP

// JSON encoding of models and solutions. Field order is insertion order so
// that reports are byte-stable; doubles are written at round-trip precision.

#include <json.hpp>

#include "ctlimpute/control.hpp"
#include "ctlimpute/fit.hpp"
#include "ctlimpute/linalg.hpp"
#include "ctlimpute/oracle.hpp"
#include "ctlimpute/series.hpp"

namespace ctlimpute::report {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

inline Json to_json(const Vector& v) { return Json(v.values()); }

/// Scalars collapse to a bare number, vectors stay arrays.
inline Json value_json(const Vector& v, bool scalar) {
  return scalar && v.size() == 1 ? Json(v[0]) : to_json(v);
}

inline Json values_json(const std::vector<Vector>& vs, bool scalar) {
  Json arr = Json::array();
  for (const auto& v : vs) arr.push_back(value_json(v, scalar));
  return arr;
}

inline Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) rows.push_back(to_json(m.row(i)));
  return rows;
}

inline Json to_json(const FitInfo& f) {
  return Json{{"equations", f.equations},
              {"unknowns", f.unknowns},
              {"rank", f.rank},
              {"rank_deficient", f.rank_deficient()},
              {"residual_norm", f.residual_norm}};
}

inline Json to_json(const ArModel& m) {
  return Json{{"kind", "ar"},
              {"order", m.order()},
              {"coefficients", m.a},
              {"intercept", m.b},
              {"fit", to_json(m.info)}};
}

inline Json to_json(const VarModel& m) {
  return Json{{"kind", "var"}, {"order", 1}, {"A", to_json(m.A)}, {"b", to_json(m.b)}, {"fit", to_json(m.info)}};
}

inline Json to_json(const RegModel& m) {
  return Json{{"kind", "regression"},
              {"responses", m.responses()},
              {"covariates", m.covariates()},
              {"A", to_json(m.A)},
              {"b", to_json(m.b)},
              {"fit", to_json(m.info)}};
}

inline Json to_json(const oracle::Verdict& v) {
  return Json{{"objective", v.objective},
              {"oracle_objective", v.oracle_objective},
              {"objective_error", v.objective_error},
              {"constraint_residual", v.constraint_residual},
              {"feasible", v.feasible},
              {"pass", v.pass}};
}

/// One gap entry of the imputation report.
inline Json gap_json(const GapSegment& gap, const ControlSolution& sol, std::span<const Vector> seeds,
                     bool scalar) {
  Json j;
  j["gap_start"] = gap.gap_start;
  j["gap_end"] = gap.gap_end;
  j["anchor_index"] = gap.anchor_index;
  j["status"] = sol.constrained ? "constrained" : "unconstrained";
  j["mode"] = to_string(sol.mode);
  j["seed_indices"] = gap.seed_indices;
  j["seeds"] = values_json(std::vector<Vector>(seeds.begin(), seeds.end()), scalar);
  j["seeds_include_imputed"] = gap.seeds_include_imputed;
  j["anchor_value"] = gap.anchor_value ? value_json(*gap.anchor_value, scalar) : Json(nullptr);
  j["predicted"] = values_json(sol.predicted, scalar);
  j["delta"] = sol.constrained ? value_json(sol.delta, scalar) : Json(nullptr);
  j["multiplier"] = value_json(sol.multiplier, scalar);
  j["controls"] = values_json(sol.controls, scalar);
  j["terminal_control"] =
      sol.constrained && !sol.controls.empty() ? value_json(sol.controls.back(), scalar) : Json(nullptr);
  j["imputed"] = values_json(sol.imputed, scalar);
  j["terminal_residual"] = sol.terminal_residual;
  j["objective"] = sol.objective();
  j["rank_deficient_reachability"] = sol.rank_deficient;
  Json diag = Json::object();
  if (!sol.weights.empty()) diag["weights_most_recent_first"] = sol.weights;
  if (sol.weight_discrepancy) diag["max_abs_gamma_minus_psi"] = *sol.weight_discrepancy;
  if (!sol.paper_norms.empty()) {
    diag["reference_norms"] = sol.paper_norms;
    diag["exact_norms"] = sol.exact_norms;
  }
  j["diagnostics"] = diag;
  return j;
}

}  // namespace ctlimpute::report

#endif  // CTLIMPUTE_REPORT_HPP

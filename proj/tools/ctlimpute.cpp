// Command-line front end: fit, impute, coeffs, verify.
//
// Exit status: 0 success, 2 usage error, 3 data error, 4 numerical error,
// 5 verification failure. Every failure prints one line to stderr.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "ctlimpute/pipeline.hpp"

namespace {

using namespace ctlimpute;

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;
constexpr int kExitVerify = 5;

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage: return kExitUsage;
    case ErrorKind::data: return kExitData;
    case ErrorKind::numerical: return kExitNumerical;
  }
  return 1;
}

std::string read_input(const std::string& path) {
  if (path.empty() || path == "-") {
    return {std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot read input file '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write output file '" + path + "'");
  out << text;
}

struct Options {
  std::string input;
  std::string output;
  std::string report;
  std::string model = "ar";
  std::size_t order = 1;
  std::string mode = "exact";
  std::vector<std::string> na;
  std::vector<std::string> columns;
  std::vector<std::string> covariates;
  bool refit_per_gap = false;
  bool allow_open_gap = false;
  bool no_intercept = false;
  bool tab = false;
  int precision = 6;
  // coeffs
  std::vector<double> coefficients;
  std::size_t length = 10;
  // verify
  std::uint64_t seed = 1;
  std::size_t cases = 1000;
  bool inject_fault = false;
  bool quiet = false;
};

RunConfig to_run_config(const Options& o) {
  RunConfig cfg;
  cfg.model = parse_model_kind(o.model);
  cfg.order = o.order;
  cfg.mode = parse_mode(o.mode);
  if (!o.na.empty()) cfg.csv.na_markers = o.na;
  cfg.csv.value_columns = o.columns;
  cfg.csv.delimiter = o.tab ? '\t' : ',';
  cfg.covariates = o.covariates;
  cfg.refit_per_gap = o.refit_per_gap;
  cfg.allow_open_gap = o.allow_open_gap;
  cfg.intercept = !o.no_intercept;
  cfg.precision = o.precision;
  return cfg;
}

void add_data_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--input", o.input, "Input table (default: stdin)");
  cmd->add_option("--model", o.model, "ar | var | regression")->capture_default_str();
  cmd->add_option("--order", o.order, "Autoregressive order p")->capture_default_str();
  cmd->add_option("--na", o.na, "Missing-value markers (empty cells always count)")->delimiter(',');
  cmd->add_option("--columns", o.columns, "Value columns (default: all)")->delimiter(',');
  cmd->add_option("--covariates", o.covariates, "Covariate columns for the regression model")->delimiter(',');
  cmd->add_flag("--no-intercept", o.no_intercept, "Fit without an intercept term");
  cmd->add_flag("--tab", o.tab, "Tab-delimited input and output");
}

int run(int argc, char** argv) {
  CLI::App app{"Fill gaps with a known endpoint by minimum-energy control of a fitted model"};
  app.require_subcommand(1);
  Options o;

  auto* fit = app.add_subcommand("fit", "Fit a model and print its coefficients");
  add_data_options(fit, o);

  auto* impute = app.add_subcommand("impute", "Fill every gap and write the completed table");
  add_data_options(impute, o);
  impute->add_option("--output", o.output, "Output table (default: stdout)");
  impute->add_option("--report", o.report, "Write the JSON report here");
  impute->add_option("--mode", o.mode, "exact | paper")->capture_default_str();
  impute->add_flag("--refit-per-gap", o.refit_per_gap, "Refit on all observed values before each gap");
  impute->add_flag("--allow-open-gap", o.allow_open_gap, "Fill a trailing gap with the uncorrected prediction");
  impute->add_option("--precision", o.precision, "Significant digits for imputed values")->capture_default_str();

  auto* coeffs = app.add_subcommand("coeffs", "Print impulse-response and reference gamma weights");
  add_data_options(coeffs, o);
  coeffs->add_option("--coefficients", o.coefficients, "AR coefficients a_1..a_p (skip fitting)")
      ->delimiter(',');
  coeffs->add_option("--length", o.length, "Number of weights")->capture_default_str();

  auto* verify = app.add_subcommand("verify", "Certify random instances against the brute-force oracle");
  verify->add_option("--model", o.model, "ar | var | regression")->capture_default_str();
  verify->add_option("--mode", o.mode, "exact | paper")->capture_default_str();
  verify->add_option("--seed", o.seed, "First instance seed")->capture_default_str();
  verify->add_option("--cases", o.cases, "Number of instances")->capture_default_str();
  verify->add_flag("--inject-fault", o.inject_fault, "Perturb every solution (harness self-test)");
  verify->add_flag("--quiet", o.quiet, "Print the summary only");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*fit) {
      const auto r = run_fit(read_input(o.input), to_run_config(o));
      std::cout << r.dump(2) << "\n";
    } else if (*impute) {
      const auto res = run_impute(read_input(o.input), to_run_config(o));
      write_output(o.output, res.csv);
      if (!o.report.empty()) write_output(o.report, res.report.dump(2) + "\n");
    } else if (*coeffs) {
      if (o.length < 1) throw usage_error("--length must be at least 1");
      ArModel model;
      if (!o.coefficients.empty()) {
        model.a = o.coefficients;
      } else {
        const auto r = run_fit(read_input(o.input), to_run_config(o));
        if (r["model"]["kind"] != "ar") throw usage_error("coeffs needs an ar model");
        model.a = r["model"]["coefficients"].get<std::vector<double>>();
      }
      std::cout << run_coeffs(model, o.length);
    } else if (*verify) {
      VerifyConfig cfg;
      cfg.model = parse_model_kind(o.model);
      cfg.mode = parse_mode(o.mode);
      cfg.seed = o.seed;
      cfg.cases = o.cases;
      cfg.inject_fault = o.inject_fault;
      const auto summary = run_verify(cfg);
      if (!o.quiet) {
        for (const auto& c : summary.cases) std::cout << to_json(c, cfg.model).dump() << "\n";
      }
      report::Json s;
      s["cases"] = summary.cases.size();
      s["passed"] = summary.passed;
      s["failed"] = summary.cases.size() - summary.passed;
      s["terminal_feasible"] = summary.terminal_feasible;
      s["worst_objective_relative_error"] = summary.worst_objective_error;
      s["worst_constraint_residual"] = summary.worst_constraint_residual;
      s["worst_terminal_residual_relative"] = summary.worst_terminal_residual;
      std::cout << report::Json{{"summary", s}}.dump() << "\n";
      if (summary.cases.empty()) {
        std::cerr << "warning: 0 cases requested; verification is vacuous\n";
        return 0;
      }
      if (!summary.all_passed()) {
        std::cerr << "error: " << (summary.cases.size() - summary.passed) << " of " << summary.cases.size()
                  << " instances failed certification\n";
        return kExitVerify;
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }

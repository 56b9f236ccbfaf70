#include <gtest/gtest.h>

#include <fstream>
#include <iterator>

#include "ctlimpute/pipeline.hpp"

namespace ctlimpute {
namespace {

std::string phosphate_text() {
  std::ifstream in(std::string(CTLIMPUTE_TEST_DATA) + "/phosphate.csv", std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RunConfig phosphate_config() {
  RunConfig cfg;
  cfg.model = ModelKind::var;
  cfg.csv.value_columns = {"x1", "x2"};
  return cfg;
}

TEST(RunImpute, PhosphateSegmentationAndFeasibility) {
  const auto out = run_impute(phosphate_text(), phosphate_config());
  const auto& r = out.report;
  EXPECT_EQ(r["prefix_length"], 10);
  ASSERT_EQ(r["gaps"].size(), 2u);
  EXPECT_EQ(r["gaps"][0]["gap_start"], 11);
  EXPECT_EQ(r["gaps"][0]["gap_end"], 12);
  EXPECT_EQ(r["gaps"][0]["anchor_index"], 13);
  EXPECT_EQ(r["gaps"][1]["gap_start"], 15);
  EXPECT_EQ(r["gaps"][1]["anchor_index"], 16);
  for (const auto& g : r["gaps"]) {
    EXPECT_LE(g["terminal_residual"].get<double>(), 1e-9 * 200);
    EXPECT_TRUE(g["oracle"]["pass"].get<bool>());
  }
  // observed rows echoed, imputed rows flagged
  EXPECT_NE(out.csv.find("13,166,68,observed"), std::string::npos);
  std::size_t imputed = 0;
  for (std::size_t pos = 0; (pos = out.csv.find(",imputed", pos)) != std::string::npos; ++pos) ++imputed;
  EXPECT_EQ(imputed, 3u);
}

TEST(RunImpute, Deterministic) {
  const auto a = run_impute(phosphate_text(), phosphate_config());
  const auto b = run_impute(phosphate_text(), phosphate_config());
  EXPECT_EQ(a.csv, b.csv);
  EXPECT_EQ(a.report.dump(), b.report.dump());
}

TEST(RunImpute, GaplessInputOnlyAddsFlags) {
  RunConfig cfg;
  const auto out = run_impute("v\n1\n2\n3\n", cfg);
  EXPECT_EQ(out.csv, "v,origin\n1,observed\n2,observed\n3,observed\n");
  EXPECT_EQ(out.report["gap_count"], 0);
  EXPECT_TRUE(out.report["model"].is_null());
}

TEST(RunImpute, GapAtFirstPosition) {
  try {
    run_impute("v\nNA\n2\n3\n", RunConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
    EXPECT_NE(std::string(e.what()).find("gap has no seed window"), std::string::npos);
  }
}

TEST(RunImpute, PrefixTooShortSuggestsRefit) {
  try {
    run_impute("v\n1\n2\nNA\n4\n", RunConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
    EXPECT_NE(std::string(e.what()).find("too short"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("--refit-per-gap"), std::string::npos);
  }
}

TEST(RunImpute, RefitPerGapUsesEveryObservedValue) {
  RunConfig cfg;
  cfg.refit_per_gap = true;
  // AR(1) exact path x_n = 0.5 x_{n-1} + 1 with two gaps
  const auto out = run_impute("v\n8\n5\n3.5\nNA\n2.375\n2.1875\nNA\nNA\n2.0234375\n", cfg);
  ASSERT_EQ(out.report["gaps"].size(), 2u);
  EXPECT_TRUE(out.report["model"].is_null());
  EXPECT_TRUE(out.report["gaps"][1].contains("model"));
  EXPECT_NEAR(out.report["gaps"][0]["imputed"][0].get<double>(), 2.75, 1e-9);
  EXPECT_NEAR(out.report["gaps"][1]["imputed"][1].get<double>(), 2.046875, 1e-9);
}

TEST(RunImpute, OpenGapNeedsFlag) {
  const std::string text = "v\n1\n2\n1.5\n2.5\n1\nNA\n";
  EXPECT_THROW(run_impute(text, RunConfig{}), Error);
  RunConfig cfg;
  cfg.allow_open_gap = true;
  const auto out = run_impute(text, cfg);
  EXPECT_EQ(out.report["gaps"][0]["status"], "unconstrained");
  EXPECT_EQ(out.report["gaps"][0]["terminal_residual"], 0.0);
  EXPECT_FALSE(out.report["warnings"].empty());
}

TEST(RunImpute, PaperModeDiagnostics) {
  RunConfig cfg;
  cfg.order = 2;
  cfg.mode = CoeffMode::paper;
  const auto out = run_impute("v\n1\n3\n2\n5\n4\n6\n5\nNA\nNA\n7\n", cfg);
  const auto& d = out.report["gaps"][0]["diagnostics"];
  EXPECT_TRUE(d.contains("max_abs_gamma_minus_psi"));
  EXPECT_TRUE(d.contains("weights_most_recent_first"));

  auto vcfg = phosphate_config();
  vcfg.mode = CoeffMode::paper;
  const auto vout = run_impute(phosphate_text(), vcfg);
  EXPECT_EQ(vout.report["gaps"][0]["diagnostics"]["reference_norms"].size(), 3u);
}

TEST(RunImpute, RegressionModel) {
  RunConfig cfg;
  cfg.model = ModelKind::regression;
  cfg.csv.value_columns = {"y"};
  cfg.covariates = {"x"};
  // y = 2x + 1 exactly; the gap is filled on the line
  const auto out = run_impute("x,y\n0,1\n1,3\n2,5\n3,7\n4,NA\n5,11\n", cfg);
  EXPECT_NEAR(out.report["gaps"][0]["imputed"][0].get<double>(), 9.0, 1e-9);
  EXPECT_NE(out.csv.find("4,9,imputed"), std::string::npos);
}

TEST(RunImpute, RegressionNeedsCovariates) {
  RunConfig cfg;
  cfg.model = ModelKind::regression;
  try {
    run_impute("y\n1\n", cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::usage);
  }
}

TEST(RunFit, ReportsCoefficients) {
  const auto r = run_fit("v\n8\n5\n3.5\n2.75\n2.375\n", RunConfig{});
  EXPECT_EQ(r["model"]["kind"], "ar");
  EXPECT_NEAR(r["model"]["coefficients"][0].get<double>(), 0.5, 1e-12);
  EXPECT_NEAR(r["model"]["intercept"].get<double>(), 1.0, 1e-12);
}

TEST(RunCoeffs, TableExamples) {
  EXPECT_EQ(run_coeffs(ArModel{{1.0, 1.0}, 0.0, {}}, 5),
            "j,psi,gamma,diff\n0,1,1,0\n1,1,2,1\n2,2,4,2\n3,3,7,4\n4,5,12,7\n");
  EXPECT_EQ(run_coeffs(ArModel{{0.5}, 0.0, {}}, 3), "j,psi,gamma,diff\n0,1,1,0\n1,0.5,0.5,0\n2,0.25,0.25,0\n");
}

TEST(RunVerify, SmallBatchPassesAndFaultFails) {
  for (auto kind : {ModelKind::ar, ModelKind::var, ModelKind::regression}) {
    VerifyConfig cfg;
    cfg.model = kind;
    cfg.cases = 25;
    const auto ok = run_verify(cfg);
    EXPECT_TRUE(ok.all_passed()) << to_string(kind);
    cfg.inject_fault = true;
    EXPECT_EQ(run_verify(cfg).passed, 0u) << to_string(kind);
  }
}

}  // namespace
}  // namespace ctlimpute

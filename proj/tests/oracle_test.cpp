#include <gtest/gtest.h>

#include <random>

#include "ctlimpute/oracle.hpp"

namespace ctlimpute::oracle {
namespace {

ConstrainedProblem scalar_problem(std::vector<double> coeffs, double target) {
  ConstrainedProblem p;
  for (double c : coeffs) p.steps.push_back(Matrix{{c}});
  p.target = Vector{target};
  return p;
}

GapSegment gap_of(std::size_t start, std::size_t end, Vector anchor) {
  GapSegment g;
  g.gap_start = start;
  g.gap_end = end;
  g.anchor_index = end + 1;
  g.anchor_value = std::move(anchor);
  return g;
}

TEST(KktSolve, SingleStep) {
  const auto r = kkt_solve(scalar_problem({1.0}, 5.0));
  EXPECT_NEAR(r.controls[0][0], 5.0, 1e-14);
  EXPECT_NEAR(r.objective, 25.0, 1e-12);
  EXPECT_TRUE(r.feasible);
}

TEST(KktSolve, GeometricCoefficients) {
  // chronological: oldest step has the smallest reach
  const auto r = kkt_solve(scalar_problem({0.25, 0.5, 1.0}, -2.0));
  EXPECT_NEAR(r.objective, 64.0 / 21.0, 1e-13);
  EXPECT_NEAR(r.controls[0][0], -8.0 / 21.0, 1e-14);
  EXPECT_NEAR(r.controls[2][0], -32.0 / 21.0, 1e-14);
}

TEST(KktSolve, AllZeroStepsInfeasible) {
  const auto r = kkt_solve(scalar_problem({0.0, 0.0}, 1.0));
  EXPECT_FALSE(r.feasible);
  EXPECT_TRUE(kkt_solve(scalar_problem({0.0, 0.0}, 0.0)).feasible);
}

TEST(KktSolve, StationarityHolds) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    ConstrainedProblem p;
    const std::size_t k = 1 + t % 3;
    for (int s = 0; s < 4; ++s) {
      Matrix c(k, k);
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) c(i, j) = u(rng);
      p.steps.push_back(c);
    }
    p.target = Vector(k);
    for (auto& v : p.target) v = u(rng);
    const auto r = kkt_solve(p);
    ASSERT_TRUE(r.feasible);
    // u_n - C_n^T lambda = 0
    for (std::size_t n = 0; n < p.steps.size(); ++n)
      EXPECT_LE(norm2(r.controls[n] - mat_vec(p.steps[n].transpose(), r.multiplier)), 1e-12);
    EXPECT_LE(r.constraint_residual, 1e-9 * (1 + norm2(p.target)));
  }
}

TEST(ArProblem, Ar1MultiplierMatchesClosedForm) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const ArModel m{{1.1 * u(rng)}, u(rng), {}};
    const std::vector<double> seeds{3 * u(rng)};
    const std::size_t len = 1 + t % 12;
    const double anchor = 5 * u(rng);
    const auto prob = ar_problem(m, seeds, anchor, len + 1);
    const auto r = kkt_solve(prob);
    const auto sol = impute_gap_ar(m, gap_of(2, 1 + len, Vector{anchor}), seeds);
    EXPECT_NEAR(r.multiplier[0], sol.multiplier[0], 1e-12 * (1 + std::abs(sol.multiplier[0])));
  }
}

TEST(Certify, PassesCorrectSolution) {
  const ArModel m{{0.5}, 0.0, {}};
  const std::vector<double> seeds{16.0};
  const auto sol = impute_gap_ar(m, gap_of(2, 3, Vector{0.0}), seeds);
  const auto v = certify(sol, ar_problem(m, seeds, 0.0, 3));
  EXPECT_TRUE(v.pass);
  EXPECT_NEAR(v.oracle_objective, 64.0 / 21.0, 1e-13);
}

TEST(Certify, FailsPerturbedSolution) {
  const ArModel m{{0.5}, 0.0, {}};
  const std::vector<double> seeds{16.0};
  auto sol = impute_gap_ar(m, gap_of(2, 3, Vector{0.0}), seeds);
  sol.controls[0][0] += 1e-6;
  EXPECT_FALSE(certify(sol, ar_problem(m, seeds, 0.0, 3)).pass);
}

TEST(Certify, ZeroDeltaPasses) {
  const ArModel m{{0.5}, 0.0, {}};
  const std::vector<double> seeds{16.0};
  const auto sol = impute_gap_ar(m, gap_of(2, 3, Vector{2.0}), seeds);
  const auto v = certify(sol, ar_problem(m, seeds, 2.0, 3));
  EXPECT_TRUE(v.pass);
  EXPECT_EQ(v.oracle_objective, 0.0);
}

TEST(Certify, ObjectiveIsMinimalUnderFeasiblePerturbation) {
  const VarModel m{Matrix{{0.6, 0.2}, {-0.1, 0.4}}, Vector{0.5, -0.5}, {}};
  const Vector seed{1, 2}, anchor{-3, 4};
  const auto sol = impute_gap_var(m, gap_of(2, 5, anchor), seed);
  const auto prob = var_problem(m, seed, anchor, 5);
  ASSERT_TRUE(certify(sol, prob).pass);
  SplitMix64 rng(77);
  for (int t = 0; t < 200; ++t) {
    std::vector<Vector> d;
    for (std::size_t n = 0; n < 5; ++n) d.push_back(Vector{rng.uniform(-1, 1), rng.uniform(-1, 1)});
    // project d onto the null space of the constraint using the oracle itself
    ConstrainedProblem fix = prob;
    fix.target = apply_constraint(prob, d);
    const auto corr = kkt_solve(fix);
    double obj = 0.0;
    for (std::size_t n = 0; n < 5; ++n) {
      const Vector u = sol.controls[n] + d[n] - corr.controls[n];
      obj += dot(u, u);
    }
    EXPECT_GE(obj, sol.objective() * (1 - 1e-12));
  }
}

TEST(SplitMix64Test, KnownSequence) {
  // Reference values of SplitMix64 seeded with 0.
  SplitMix64 rng(0);
  EXPECT_EQ(rng.next(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(rng.next(), 0x6E789E6AA1B965F4ULL);
  EXPECT_EQ(rng.next(), 0x06C45D188009454FULL);
}

TEST(RandomInstance, Deterministic) {
  const auto a = random_instance(123, ScalarLimits{});
  const auto b = random_instance(123, ScalarLimits{});
  EXPECT_EQ(write_csv(a.series, std::vector<std::optional<Vector>>(a.series.length(), Vector{0.0})),
            write_csv(b.series, std::vector<std::optional<Vector>>(b.series.length(), Vector{0.0})));
  EXPECT_EQ(a.truth.a, b.truth.a);
}

TEST(RandomInstance, ScalarPreconditions) {
  const ScalarLimits lim;
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    const auto inst = random_instance(seed, lim);
    const std::size_t p = inst.truth.order();
    ASSERT_GE(p, 1u);
    ASSERT_LE(p, lim.max_order);
    ASSERT_GE(inst.gap_length, 1u);
    ASSERT_LE(inst.gap_length, lim.max_gap);
    ASSERT_GE(inst.prefix, 2 * p + 1);
    const auto layout = detect_gaps(inst.series, p);
    ASSERT_EQ(layout.gaps.size(), 1u);
    EXPECT_EQ(layout.prefix_length, inst.prefix);
    EXPECT_EQ(layout.gaps[0].length(), inst.gap_length);
    EXPECT_FALSE(layout.gaps[0].open());
  }
}

TEST(RandomInstance, VarPreconditions) {
  const VarLimits lim;
  for (std::uint64_t seed = 1; seed <= 500; ++seed) {
    const auto inst = random_instance(seed, lim);
    const std::size_t k = inst.truth.dim();
    ASSERT_GE(k, lim.min_dim);
    ASSERT_LE(k, lim.max_dim);
    ASSERT_GE(inst.prefix, k + 2);
    const auto layout = detect_gaps(inst.series, 1);
    ASSERT_EQ(layout.gaps.size(), 1u);
    EXPECT_EQ(layout.gaps[0].length(), inst.gap_length);
  }
}

TEST(RandomInstance, RegressionPreconditions) {
  const RegressionLimits lim;
  for (std::uint64_t seed = 1; seed <= 500; ++seed) {
    const auto inst = random_instance(seed, lim);
    ASSERT_EQ(inst.responses.length(), inst.covariates.length());
    for (std::size_t i = 1; i <= inst.covariates.length(); ++i) ASSERT_TRUE(inst.covariates.observed(i));
    const auto layout = detect_gaps(inst.responses, 1);
    ASSERT_EQ(layout.gaps.size(), 1u);
    EXPECT_GE(inst.prefix, inst.truth.covariates() + 2);
  }
}

}  // namespace
}  // namespace ctlimpute::oracle

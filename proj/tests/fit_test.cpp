#include <gtest/gtest.h>

#include <random>

#include "ctlimpute/fit.hpp"

namespace ctlimpute {
namespace {

/// Independent oracle: Gaussian elimination on the normal equations.
std::vector<double> normal_equations(const std::vector<std::vector<double>>& rows,
                                     const std::vector<double>& y) {
  const std::size_t n = rows.front().size();
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) a[i][j] += rows[r][i] * rows[r][j];
      a[i][n] += rows[r][i] * y[r];
    }
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = a[i][n] / a[i][i];
  return x;
}

std::vector<double> ar_path(const std::vector<double>& a, double b, std::vector<double> start,
                            std::size_t n, std::mt19937_64* rng = nullptr, double noise = 0.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  while (start.size() < n) {
    double v = b;
    for (std::size_t j = 0; j < a.size(); ++j) v += a[j] * start[start.size() - 1 - j];
    if (rng) v += noise * u(*rng);
    start.push_back(v);
  }
  return start;
}

TEST(FitArScalar, ExactRecursionRecovery) {
  const auto w = ar_path({2.0}, 1.0, {0.5}, 8);
  const auto m = fit_ar_scalar(w, 1);
  EXPECT_NEAR(m.a[0], 2.0, 1e-10);
  EXPECT_NEAR(m.b, 1.0, 1e-9);
  EXPECT_NEAR(m.info.residual_norm, 0.0, 1e-9);
  EXPECT_FALSE(m.info.rank_deficient());
}

TEST(FitArScalar, ConstantWindowIsRankDeficient) {
  const std::vector<double> w{5, 5, 5, 5, 5};
  const auto m = fit_ar_scalar(w, 1);
  EXPECT_TRUE(m.info.rank_deficient());
  // Minimum-norm point on the ridge 5a + b = 5.
  EXPECT_NEAR(5 * m.a[0] + m.b, 5.0, 1e-12);
  EXPECT_NEAR(m.a[0], 25.0 / 26.0, 1e-12);
}

TEST(FitArScalar, WindowTooShort) {
  EXPECT_THROW(fit_ar_scalar(std::vector<double>{1, 2, 3, 4}, 2), Error);
  EXPECT_NO_THROW(fit_ar_scalar(std::vector<double>{1, 2, 4, 3, 5}, 2));
}

TEST(FitArScalar, MatchesNormalEquationsOnNoisyData) {
  std::mt19937_64 rng(21);
  for (std::size_t p = 1; p <= 3; ++p) {
    const auto w = ar_path(std::vector<double>(p, 0.25), 0.7, std::vector<double>(p, 1.0), 60, &rng, 1.0);
    const auto m = fit_ar_scalar(w, p);
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (std::size_t n = p; n < w.size(); ++n) {
      std::vector<double> r;
      for (std::size_t j = 1; j <= p; ++j) r.push_back(w[n - j]);
      r.push_back(1.0);
      rows.push_back(r);
      y.push_back(w[n]);
    }
    const auto ref = normal_equations(rows, y);
    for (std::size_t j = 0; j < p; ++j) EXPECT_NEAR(m.a[j], ref[j], 1e-10);
    EXPECT_NEAR(m.b, ref[p], 1e-10);
    // within sampling error of the truth
    for (std::size_t j = 0; j < p; ++j) EXPECT_NEAR(m.a[j], 0.25, 0.35);
  }
}

TEST(FitArScalar, RecoversExactArWithDistinctRoots) {
  // Roots 0.9, -0.5, 0.3: x_n = 0.7 x_{n-1} + 0.33 x_{n-2} - 0.135 x_{n-3} + 0.2
  const std::vector<double> a{0.7, 0.33, -0.135};
  const auto w = ar_path(a, 0.2, {1.0, -2.0, 3.0}, 30);
  const auto m = fit_ar_scalar(w, 3);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(m.a[j], a[j], 1e-8);
  EXPECT_NEAR(m.b, 0.2, 1e-8);
}

TEST(FitArScalar, ShiftAndScaleEquivariance) {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t p = 1 + trial % 3;
    std::vector<double> a(p);
    for (auto& v : a) v = 0.5 * u(rng);
    const auto w = ar_path(a, u(rng), std::vector<double>(p, u(rng)), 25, &rng, 1.0);
    const auto base = fit_ar_scalar(w, p);
    const double c = 3.7, s = -2.5;
    std::vector<double> shifted = w, scaled = w;
    for (auto& v : shifted) v += c;
    for (auto& v : scaled) v *= s;
    const auto ms = fit_ar_scalar(shifted, p);
    const auto mk = fit_ar_scalar(scaled, p);
    double sum_a = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      EXPECT_NEAR(ms.a[j], base.a[j], 1e-8);
      EXPECT_NEAR(mk.a[j], base.a[j], 1e-8);
      sum_a += base.a[j];
    }
    EXPECT_NEAR(ms.b, base.b + c * (1.0 - sum_a), 1e-8 * (1 + std::abs(base.b)));
    EXPECT_NEAR(mk.b, s * base.b, 1e-8 * (1 + std::abs(s * base.b)));

    const std::vector<double> seeds(w.end() - static_cast<std::ptrdiff_t>(p), w.end());
    std::vector<double> seeds_shift = seeds, seeds_scale = seeds;
    for (auto& v : seeds_shift) v += c;
    for (auto& v : seeds_scale) v *= s;
    const auto pb = predict_forward(base, seeds, 5);
    const auto ps = predict_forward(ms, seeds_shift, 5);
    const auto pk = predict_forward(mk, seeds_scale, 5);
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_NEAR(ps[i], pb[i] + c, 1e-8 * (1 + std::abs(pb[i])));
      EXPECT_NEAR(pk[i], s * pb[i], 1e-8 * (1 + std::abs(s * pb[i])));
    }
  }
}

TEST(FitArMasked, SkipsUnusableRows) {
  // values 3 and 4 unusable; remaining equations still come from an exact AR(1)
  const auto w = ar_path({0.5}, 2.0, {1.0}, 12);
  std::vector<double> vals = w;
  bool mask[12];
  for (int i = 0; i < 12; ++i) mask[i] = true;
  mask[3] = mask[4] = false;
  vals[3] = vals[4] = 1e9;
  const auto m = fit_ar_masked(vals, std::span<const bool>(mask, 12), 1);
  EXPECT_EQ(m.info.equations, 11u - 3u);
  EXPECT_NEAR(m.a[0], 0.5, 1e-10);
  EXPECT_NEAR(m.b, 2.0, 1e-10);
}

TEST(FitVar1, ConstantPathIsRankDeficient) {
  // A = I, b = 0 generates a constant path, which cannot identify A.
  std::vector<Vector> w(6, Vector{1.0, 2.0});
  const auto m = fit_var1(w);
  EXPECT_TRUE(m.info.rank_deficient());
  // prediction is still exact on the constant path
  EXPECT_LE(norm_inf(mat_vec(m.A, Vector{1, 2}) + m.b - Vector{1, 2}), 1e-12);
}

TEST(FitVar1, ExactLinearDynamicsRecovered) {
  const Matrix a{{0.5, 0.2}, {-0.3, 0.8}};
  const Vector b{1.0, -0.5};
  std::vector<Vector> w{Vector{3.0, -1.0}};
  for (int i = 0; i < 8; ++i) w.push_back(mat_vec(a, w.back()) + b);
  const auto m = fit_var1(w);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(m.A(i, j), a(i, j), 1e-9);
    EXPECT_NEAR(m.b[i], b[i], 1e-9);
  }
}

TEST(FitVar1, ScalarConstantPathPredictsExactly) {
  std::vector<Vector> w(5, Vector{4.0});
  const auto m = fit_var1(w);
  EXPECT_NEAR(m.A(0, 0) * 4.0 + m.b[0], 4.0, 1e-12);
}

TEST(FitVar1, WindowTooShort) {
  std::vector<Vector> w(3, Vector{1.0, 2.0});
  EXPECT_THROW(fit_var1(w), Error);
}

TEST(FitVar1, ScalarCaseMatchesArFit) {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 50; ++trial) {
    const auto w = ar_path({0.6}, 1.5, {2.0}, 5 + trial % 20, &rng, 1.0);
    std::vector<Vector> wv;
    for (double v : w) wv.push_back(Vector{v});
    const auto ar = fit_ar_scalar(w, 1);
    const auto var = fit_var1(wv);
    EXPECT_NEAR(var.A(0, 0), ar.a[0], 1e-10);
    EXPECT_NEAR(var.b[0], ar.b, 1e-10);
  }
}

TEST(FitRegression, ExactLine) {
  std::vector<Vector> y, x;
  for (double t : {0.0, 1.0, 2.5, 4.0}) {
    x.push_back(Vector{t});
    y.push_back(Vector{3 * t + 2});
  }
  const auto m = fit_regression(y, x);
  EXPECT_NEAR(m.A(0, 0), 3.0, 1e-12);
  EXPECT_NEAR(m.b[0], 2.0, 1e-12);
}

TEST(FitRegression, ConstantResponse) {
  std::vector<Vector> y, x;
  for (double t : {1.0, 2.0, 3.0, 7.0}) {
    x.push_back(Vector{t});
    y.push_back(Vector{4.5});
  }
  const auto m = fit_regression(y, x);
  EXPECT_NEAR(m.A(0, 0), 0.0, 1e-12);
  EXPECT_NEAR(m.b[0], 4.5, 1e-12);
}

TEST(FitRegression, PlantedCoefficientsMatchNormalEquations) {
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<Vector> y, x;
  std::vector<std::vector<double>> rows;
  std::vector<double> ys;
  for (int i = 0; i < 40; ++i) {
    const Vector xi{u(rng), u(rng), u(rng)};
    const double yi = 1.5 * xi[0] - 0.5 * xi[1] + 2.0 * xi[2] + 0.7 + 0.1 * u(rng);
    x.push_back(xi);
    y.push_back(Vector{yi});
    rows.push_back({xi[0], xi[1], xi[2], 1.0});
    ys.push_back(yi);
  }
  const auto m = fit_regression(y, x);
  const auto ref = normal_equations(rows, ys);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(m.A(0, j), ref[j], 1e-8);
  EXPECT_NEAR(m.b[0], ref[3], 1e-8);
}

TEST(FitRegression, WindowTooShort) {
  std::vector<Vector> y(3, Vector{1.0}), x(3, Vector{1.0, 2.0});
  EXPECT_THROW(fit_regression(y, x), Error);
}

TEST(PredictForward, Examples) {
  const ArModel walk{{1.0}, 0.0, {}};
  EXPECT_EQ(predict_forward(walk, std::vector<double>{7}, 3), (std::vector<double>{7, 7, 7}));
  const ArModel half{{0.5}, 0.0, {}};
  EXPECT_EQ(predict_forward(half, std::vector<double>{16}, 3), (std::vector<double>{8, 4, 2}));
  const VarModel var{Matrix::zero(2, 2), Vector{1, 2}, {}};
  const auto pv = predict_forward(var, Vector{9, -9}, 2);
  EXPECT_EQ(pv, (std::vector<Vector>{Vector{1, 2}, Vector{1, 2}}));
}

TEST(PredictForward, MissingCovariate) {
  const RegModel m{Matrix{{1.0}}, Vector{0.0}, {}};
  std::vector<std::optional<Vector>> cov{Vector{1.0}, std::nullopt};
  EXPECT_THROW(predict_forward(m, cov), Error);
}

}  // namespace
}  // namespace ctlimpute

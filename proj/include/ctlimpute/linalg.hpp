#ifndef CTLIMPUTE_LINALG_HPP
#define CTLIMPUTE_LINALG_HPP

/** @file
 * Small dense linear-algebra layer: row-major matrices, vectors, an SPD
 * solver with a minimum-norm fallback, and rank-revealing least squares
 * via one-sided Jacobi SVD.
 *
 * Everything is plain double precision and deterministic: loops run in a
 * fixed order and no pivoting depends on anything but the input values.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ctlimpute/error.hpp"

namespace ctlimpute {

class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t n, double fill = 0.0) : data_(n, fill) {}
  Vector(std::initializer_list<double> init) : data_(init) {}
  explicit Vector(std::vector<double> data) : data_(std::move(data)) {}
  explicit Vector(std::span<const double> data)
      : data_(data.begin(), data.end()) {}

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  std::span<const double> view() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  Vector& operator+=(const Vector& o) {
    check_same(o);
    for (std::size_t i = 0; i < size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Vector& operator-=(const Vector& o) {
    check_same(o);
    for (std::size_t i = 0; i < size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Vector& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend Vector operator+(Vector a, const Vector& b) { return a += b; }
  friend Vector operator-(Vector a, const Vector& b) { return a -= b; }
  friend Vector operator*(double s, Vector a) { return a *= s; }
  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  void check_same(const Vector& o) const {
    if (o.size() != size()) {
      throw numerical_error("vector dimension mismatch: " +
                            std::to_string(size()) + " vs " +
                            std::to_string(o.size()));
    }
  }

  std::vector<double> data_;
};

inline double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw numerical_error("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vector& v) { return std::sqrt(dot(v, v)); }

inline double norm_inf(const Vector& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

/// Dense row-major matrix with at least one row and one column.
class Matrix {
 public:
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) throw numerical_error("matrix must be non-empty");
  }

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
      : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (rows == 0 || cols == 0) throw numerical_error("matrix must be non-empty");
    if (data_.size() != rows * cols) {
      throw numerical_error("matrix entry count does not match shape");
    }
    for (double v : data_) {
      if (!std::isfinite(v)) throw numerical_error("matrix entry is not finite");
    }
  }

  /// Row-list literal, e.g. `Matrix{{1, 2}, {3, 4}}`.
  Matrix(std::initializer_list<std::initializer_list<double>> rows)
      : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
    if (rows_ == 0 || cols_ == 0) throw numerical_error("matrix must be non-empty");
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw numerical_error("ragged matrix literal");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static Matrix zero(std::size_t rows, std::size_t cols) {
    return Matrix(rows, cols);
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<const double> entries() const noexcept { return data_; }

  Vector row(std::size_t i) const {
    return Vector(std::span<const double>(data_).subspan(i * cols_, cols_));
  }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  double max_abs() const noexcept {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  Matrix& operator+=(const Matrix& o) {
    if (o.rows_ != rows_ || o.cols_ != cols_) {
      throw numerical_error("matrix dimension mismatch in addition");
    }
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

inline Vector mat_vec(const Matrix& a, const Vector& v) {
  if (a.cols() != v.size()) {
    throw numerical_error("mat_vec: matrix has " + std::to_string(a.cols()) +
                          " columns but vector has " + std::to_string(v.size()) +
                          " entries");
  }
  Vector out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * v[j];
    out[i] = s;
  }
  return out;
}

inline Matrix mat_mul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw numerical_error("mat_mul: dimension mismatch");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

/// A * A^T.
inline Matrix outer_gram(const Matrix& a) { return mat_mul(a, a.transpose()); }

/// Powers A^0..A^kmax, each computed as A times the previous entry.
inline std::vector<Matrix> mat_pow_table(const Matrix& a, std::size_t kmax) {
  if (!a.square()) throw numerical_error("mat_pow_table: matrix is not square");
  std::vector<Matrix> table;
  table.reserve(kmax + 1);
  table.push_back(Matrix::identity(a.rows()));
  for (std::size_t k = 0; k < kmax; ++k) table.push_back(mat_mul(a, table.back()));
  return table;
}

struct LinalgTolerances {
  /// Singular values below this fraction of the largest count as zero.
  double rank_cutoff = 1e-10;
  /// LDL^T pivots below this fraction of the largest diagonal count as zero.
  double spd_pivot_cutoff = 1e-12;
  /// Allowed relative asymmetry for solve_spd input.
  double symmetry = 1e-10;
};

struct LeastSquaresResult {
  Vector coeffs;
  std::size_t rank = 0;
  double residual_norm = 0.0;
  bool rank_deficient() const noexcept { return rank < coeffs.size(); }
};

namespace detail {

/// One-sided Jacobi SVD of a tall matrix: x = U diag(s) V^T.
/// U is returned column-scaled (columns are U * s), V is orthogonal.
struct JacobiSvd {
  Matrix us;  // m x n, columns are sigma_j * u_j
  Matrix v;   // n x n
  std::vector<double> sigma;
};

inline JacobiSvd jacobi_svd(const Matrix& x) {
  const std::size_t m = x.rows();
  const std::size_t n = x.cols();
  JacobiSvd out{x, Matrix::identity(n), std::vector<double>(n)};
  Matrix& u = out.us;
  Matrix& v = out.v;
  constexpr double eps = 1e-15;
  constexpr int max_sweeps = 60;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          alpha += u(i, p) * u(i, p);
          beta += u(i, q) * u(i, q);
          gamma += u(i, p) * u(i, q);
        }
        if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) {
          continue;
        }
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double up = u(i, p), uq = u(i, q);
          u(i, p) = c * up - s * uq;
          u(i, q) = s * up + c * uq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += u(i, j) * u(i, j);
    out.sigma[j] = std::sqrt(s);
  }
  return out;
}

}  // namespace detail

/// Minimum-norm least-squares solution of X c ~ y with numerical rank.
inline LeastSquaresResult least_squares(const Matrix& x, const Vector& y,
                                        const LinalgTolerances& tol = {}) {
  if (x.rows() < x.cols()) {
    throw numerical_error("least_squares: fewer rows (" + std::to_string(x.rows()) +
                          ") than columns (" + std::to_string(x.cols()) + ")");
  }
  if (y.size() != x.rows()) {
    throw numerical_error("least_squares: right-hand side length mismatch");
  }
  const auto svd = detail::jacobi_svd(x);
  const std::size_t n = x.cols();
  const double smax = *std::max_element(svd.sigma.begin(), svd.sigma.end());
  const double cutoff = tol.rank_cutoff * smax;

  LeastSquaresResult res{Vector(n), 0, 0.0};
  for (std::size_t j = 0; j < n; ++j) {
    const double sj = svd.sigma[j];
    if (sj <= cutoff || sj == 0.0) continue;
    ++res.rank;
    // coefficient along v_j is (u_j . y) / s_j, with u_j = us_j / s_j
    double proj = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) proj += svd.us(i, j) * y[i];
    const double w = proj / (sj * sj);
    for (std::size_t i = 0; i < n; ++i) res.coeffs[i] += w * svd.v(i, j);
  }
  res.residual_norm = norm2(mat_vec(x, res.coeffs) - y);
  return res;
}

struct SpdSolution {
  Vector x;
  /// True when the factorization hit a negligible pivot and the
  /// minimum-norm least-squares fallback produced x.
  bool singular = false;
};

/// Solves G x = rhs for symmetric positive (semi)definite G.
///
/// LDL^T without pivoting, eliminating in natural index order. A pivot
/// below `spd_pivot_cutoff` times the largest diagonal entry switches to
/// the minimum-norm least-squares solution and sets `singular`.
inline SpdSolution solve_spd(const Matrix& g, const Vector& rhs,
                             const LinalgTolerances& tol = {}) {
  if (!g.square()) throw numerical_error("solve_spd: matrix is not square");
  if (rhs.size() != g.rows()) {
    throw numerical_error("solve_spd: right-hand side length mismatch");
  }
  const std::size_t n = g.rows();
  const double scale = g.max_abs();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(g(i, j) - g(j, i)) > tol.symmetry * scale) {
        throw numerical_error("solve_spd: matrix is not symmetric");
      }

  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, g(i, i));
  const double pivot_floor = tol.spd_pivot_cutoff * max_diag;

  Matrix l = Matrix::identity(n);
  std::vector<double> d(n);
  bool singular = max_diag <= 0.0;
  for (std::size_t j = 0; j < n && !singular; ++j) {
    double dj = g(j, j);
    for (std::size_t k = 0; k < j; ++k) dj -= l(j, k) * l(j, k) * d[k];
    if (!(dj > pivot_floor)) {
      singular = true;
      break;
    }
    d[j] = dj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = g(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k) * d[k];
      l(i, j) = s / dj;
    }
  }
  if (singular) return {least_squares(g, rhs, tol).coeffs, true};

  Vector z(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = rhs[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * z[k];
    z[i] = s;
  }
  for (std::size_t i = 0; i < n; ++i) z[i] /= d[i];
  Vector x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = z[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
    x[ii] = s;
  }
  return {std::move(x), false};
}

}  // namespace ctlimpute

#endif  // CTLIMPUTE_LINALG_HPP

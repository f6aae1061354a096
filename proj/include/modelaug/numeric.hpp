#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "modelaug/errors.hpp"

namespace modelaug {

using Vector = std::vector<double>;

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

// Cholesky pivot floor: a diagonal pivot at or below this means the input is
// not SPD for our purposes.
inline constexpr double kSpdPivotTol = 1e-12;

inline bool all_finite(const Vector& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline bool all_finite(const Matrix& m) {
  for (double x : m.data)
    if (!std::isfinite(x)) return false;
  return true;
}

inline double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw invalid_input("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double norm1(const Vector& v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

inline double max_abs(const Vector& v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

inline Vector matvec(const Matrix& a, const Vector& x) {
  if (a.cols != x.size())
    throw invalid_input("matvec: matrix has " + std::to_string(a.cols) + " cols, vector length " +
                        std::to_string(x.size()));
  Vector y(a.rows, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double s = 0.0;
    const double* row = a.data.data() + i * a.cols;
    for (std::size_t j = 0; j < a.cols; ++j) s += row[j] * x[j];
    y[i] = s;
  }
  return y;
}

// y = A^T x without forming the transpose.
inline Vector matvec_transposed(const Matrix& a, const Vector& x) {
  if (a.rows != x.size())
    throw invalid_input("matvec_transposed: matrix has " + std::to_string(a.rows) +
                        " rows, vector length " + std::to_string(x.size()));
  Vector y(a.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* row = a.data.data() + i * a.cols;
    const double xi = x[i];
    for (std::size_t j = 0; j < a.cols; ++j) y[j] += row[j] * xi;
  }
  return y;
}

// A^T A; symmetric positive semidefinite by construction.
inline Matrix gram(const Matrix& a) {
  if (a.rows == 0 || a.cols == 0) throw invalid_input("gram: empty matrix");
  Matrix g(a.cols, a.cols);
  for (std::size_t i = 0; i < a.cols; ++i) {
    for (std::size_t j = i; j < a.cols; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < a.rows; ++r) s += a(r, i) * a(r, j);
      g(i, j) = s;
      g(j, i) = s;
    }
  }
  return g;
}

// Lower-triangular L with L L^T = A.  Reads the lower triangle of A.
inline Matrix cholesky(const Matrix& a) {
  if (a.rows != a.cols) throw invalid_input("cholesky: matrix not square");
  const std::size_t n = a.rows;
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (d <= kSpdPivotTol)
      throw factorization_error("cholesky: non-positive pivot " + std::to_string(d) +
                                " at column " + std::to_string(j));
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

// Solves A x = b for symmetric positive definite A via Cholesky and two
// triangular solves.
inline Vector spd_solve(const Matrix& a, const Vector& b) {
  if (a.rows != b.size()) throw invalid_input("spd_solve: dimension mismatch");
  const Matrix l = cholesky(a);
  const std::size_t n = b.size();
  Vector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
    y[i] = s / l(i, i);
  }
  Vector x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
    x[ii] = s / l(ii, ii);
  }
  return x;
}

// argmin ||A x - b||_2 for full-column-rank A, via the normal equations.
// Rank deficiency surfaces as factorization_error from the SPD solve.
inline Vector least_squares(const Matrix& a, const Vector& b) {
  if (a.rows != b.size()) throw invalid_input("least_squares: dimension mismatch");
  if (a.cols == 0) throw invalid_input("least_squares: matrix has no columns");
  return spd_solve(gram(a), matvec_transposed(a, b));
}

}  // namespace modelaug

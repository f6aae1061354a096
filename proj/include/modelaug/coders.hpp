#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "modelaug/dictionary.hpp"
#include "modelaug/errors.hpp"
#include "modelaug/numeric.hpp"

namespace modelaug {

// Residual / correlation early exits for the greedy pursuit.
inline constexpr double kOmpResidualTol = 1e-10;
inline constexpr double kOmpCorrelationTol = 1e-12;

enum class OmpStop {
  support_limit,      // reached k selected columns
  residual_tol,       // residual norm fell below kOmpResidualTol
  correlation_tol,    // best remaining |correlation| below kOmpCorrelationTol
  dependent_columns,  // refit failed; kept the last valid support
};

struct SparseCode {
  std::vector<std::size_t> support;  // selection order
  Vector coefficients;               // aligned with support
  std::size_t ambient_len = 0;
  double residual_norm = 0.0;
  std::vector<double> residual_trace;  // ||r|| after 0, 1, ... iterations
  OmpStop stop = OmpStop::support_limit;

  Vector expand() const {
    Vector full(ambient_len, 0.0);
    for (std::size_t t = 0; t < support.size(); ++t) full[support[t]] = coefficients[t];
    return full;
  }
};

struct DenseCode {
  Vector coefficients;
};

struct FusedCode {
  Vector coefficients;
};

enum class FusionNorm { l2, l1, max_abs };

inline FusionNorm fusion_norm_from_string(const std::string& s) {
  if (s == "l2") return FusionNorm::l2;
  if (s == "l1") return FusionNorm::l1;
  if (s == "max-abs") return FusionNorm::max_abs;
  throw invalid_input("unknown fusion norm '" + s + "' (expected l2, l1 or max-abs)");
}

inline std::string to_string(FusionNorm n) {
  switch (n) {
    case FusionNorm::l2: return "l2";
    case FusionNorm::l1: return "l1";
    default: return "max-abs";
  }
}

// v / ||v|| under the chosen norm; the zero vector stays zero.
inline Vector normalized(const Vector& v, FusionNorm norm = FusionNorm::l2) {
  double n = 0.0;
  switch (norm) {
    case FusionNorm::l2: n = norm2(v); break;
    case FusionNorm::l1: n = norm1(v); break;
    case FusionNorm::max_abs: n = max_abs(v); break;
  }
  if (n == 0.0) return Vector(v.size(), 0.0);
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

// Greedy orthogonal pursuit: pick the column best correlated with the
// residual, refit all selected coefficients by least squares, repeat.
inline SparseCode omp_encode(const Dictionary& d, const Vector& s, std::size_t k) {
  if (s.size() != d.dim())
    throw invalid_input("omp_encode: sample length " + std::to_string(s.size()) +
                        " does not match dictionary dimension " + std::to_string(d.dim()));
  if (!all_finite(s)) throw invalid_input("omp_encode: non-finite sample");
  if (k > d.size())
    throw invalid_input("omp_encode: sparsity " + std::to_string(k) +
                        " exceeds dictionary size " + std::to_string(d.size()));

  SparseCode code;
  code.ambient_len = d.size();
  code.residual_trace.push_back(norm2(s));
  code.stop = OmpStop::support_limit;

  Vector residual = s;
  std::vector<bool> selected(d.size(), false);

  while (code.support.size() < k) {
    if (norm2(residual) <= kOmpResidualTol) {
      code.stop = OmpStop::residual_tol;
      break;
    }
    const Vector corr = matvec_transposed(d.columns, residual);
    std::size_t best = d.size();
    double best_abs = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
      if (selected[j]) continue;
      double a = std::abs(corr[j]);
      if (a > best_abs) {  // strict: ties resolve to the lowest index
        best_abs = a;
        best = j;
      }
    }
    if (best == d.size() || best_abs <= kOmpCorrelationTol) {
      code.stop = OmpStop::correlation_tol;
      break;
    }

    code.support.push_back(best);
    selected[best] = true;
    Matrix cols(d.dim(), code.support.size());
    for (std::size_t t = 0; t < code.support.size(); ++t)
      for (std::size_t r = 0; r < d.dim(); ++r) cols(r, t) = d.columns(r, code.support[t]);

    Vector coeffs;
    try {
      coeffs = least_squares(cols, s);
    } catch (const factorization_error&) {
      code.support.pop_back();
      selected[best] = false;
      code.stop = OmpStop::dependent_columns;
      break;
    }
    code.coefficients = coeffs;
    residual = s;
    const Vector approx = matvec(cols, coeffs);
    for (std::size_t r = 0; r < residual.size(); ++r) residual[r] -= approx[r];
    code.residual_trace.push_back(norm2(residual));
  }

  code.residual_norm = code.residual_trace.back();
  return code;
}

// Ridge projection onto the dictionary span: (D^T D + lambda I) a = D^T s.
inline DenseCode dense_encode(const Dictionary& d, const Vector& s, double lambda) {
  if (lambda <= 0.0)
    throw invalid_input("dense_encode: lambda must be positive, got " + std::to_string(lambda));
  if (s.size() != d.dim())
    throw invalid_input("dense_encode: sample length " + std::to_string(s.size()) +
                        " does not match dictionary dimension " + std::to_string(d.dim()));
  if (!all_finite(s)) throw invalid_input("dense_encode: non-finite sample");

  Matrix lhs = gram(d.columns);
  for (std::size_t i = 0; i < lhs.rows; ++i) lhs(i, i) += lambda;
  return DenseCode{spd_solve(lhs, matvec_transposed(d.columns, s))};
}

inline FusedCode fuse(const SparseCode& sparse, const DenseCode& dense,
                      FusionNorm norm = FusionNorm::l2) {
  if (sparse.ambient_len != dense.coefficients.size())
    throw invalid_input("fuse: sparse length " + std::to_string(sparse.ambient_len) +
                        " vs dense length " + std::to_string(dense.coefficients.size()));
  const Vector a = normalized(sparse.expand(), norm);
  const Vector b = normalized(dense.coefficients, norm);
  Vector out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return FusedCode{out};
}

}  // namespace modelaug

//
// Copyright 2026 The dprobust Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// Small dense symmetric linear algebra: a symmetric matrix type with exactly
// mirrored storage, and a cyclic Jacobi eigensolver that backs solves,
// inverses and square roots.

#ifndef DPROBUST_LINALG_H_
#define DPROBUST_LINALG_H_

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "dprobust/errors.h"

namespace dprobust {

inline constexpr Eigen::Index kMaxSymmetricDim = 512;
// Relative eigenvalue floor below which a matrix counts as singular.
inline constexpr double kSingularityTolerance = 1e-12;

template <typename Scalar>
class SymMatrix {
 public:
  using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  SymMatrix() = default;

  // Symmetrizes as (a + a^T) / 2 so that entry (i,j) and (j,i) are bitwise
  // equal.
  explicit SymMatrix(const Dense& a) {
    if (a.rows() != a.cols()) {
      throw ValidationError("SymMatrix: input is not square");
    }
    if (a.rows() < 1) {
      throw ValidationError("SymMatrix: dimension must be at least 1");
    }
    if (!a.allFinite()) {
      throw ValidationError("SymMatrix: non-finite entry");
    }
    entries_ = Dense(a.rows(), a.cols());
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      for (Eigen::Index i = 0; i <= j; ++i) {
        const Scalar v = Scalar(0.5) * (a(i, j) + a(j, i));
        entries_(i, j) = v;
        entries_(j, i) = v;
      }
    }
  }

  static SymMatrix Identity(Eigen::Index dim) {
    return SymMatrix(Dense::Identity(dim, dim));
  }
  static SymMatrix Diagonal(
      const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& diag) {
    return SymMatrix(Dense(diag.asDiagonal()));
  }

  Eigen::Index dim() const { return entries_.rows(); }
  bool empty() const { return entries_.size() == 0; }
  Scalar operator()(Eigen::Index i, Eigen::Index j) const {
    return entries_(i, j);
  }
  const Dense& dense() const { return entries_; }

  // Principal submatrix on the given (sorted or unsorted) index set.
  SymMatrix Block(std::span<const Eigen::Index> rows) const {
    Dense out(rows.size(), rows.size());
    for (std::size_t a = 0; a < rows.size(); ++a) {
      for (std::size_t b = 0; b < rows.size(); ++b) {
        out(a, b) = entries_(rows[a], rows[b]);
      }
    }
    return SymMatrix(out);
  }

 private:
  Dense entries_;
};

using SymMatrixd = SymMatrix<double>;

template <typename Scalar>
struct SymmetricEigenDecomposition {
  // Ascending.
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> values;
  // Column j is the unit eigenvector for values(j).
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> vectors;
};

// Full spectrum by cyclic Jacobi rotations.
template <typename Scalar>
SymmetricEigenDecomposition<Scalar> JacobiEigen(const SymMatrix<Scalar>& m,
                                                int max_sweeps = 100) {
  using Dense = typename SymMatrix<Scalar>::Dense;
  const Eigen::Index n = m.dim();
  if (n < 1) throw ValidationError("JacobiEigen: empty matrix");
  if (n > kMaxSymmetricDim) {
    throw ValidationError("JacobiEigen: dimension " + std::to_string(n) +
                          " exceeds " + std::to_string(kMaxSymmetricDim));
  }
  Dense a = m.dense();
  Dense v = Dense::Identity(n, n);
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    Scalar off = 0;
    Scalar diag = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      diag += a(j, j) * a(j, j);
      for (Eigen::Index i = 0; i < j; ++i) off += a(i, j) * a(i, j);
    }
    if (off == Scalar(0) || off <= eps * eps * diag) break;

    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Scalar apq = a(p, q);
        if (apq == Scalar(0)) continue;
        const Scalar theta = (a(q, q) - a(p, p)) / (Scalar(2) * apq);
        const Scalar t =
            (theta >= 0 ? Scalar(1) : Scalar(-1)) /
            (std::abs(theta) + std::sqrt(theta * theta + Scalar(1)));
        const Scalar c = Scalar(1) / std::sqrt(t * t + Scalar(1));
        const Scalar s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar g = a(k, p);
          const Scalar h = a(k, q);
          a(k, p) = c * g - s * h;
          a(k, q) = s * g + c * h;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar g = a(p, k);
          const Scalar h = a(q, k);
          a(p, k) = c * g - s * h;
          a(q, k) = s * g + c * h;
        }
        a(p, q) = Scalar(0);
        a(q, p) = Scalar(0);
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar g = v(k, p);
          const Scalar h = v(k, q);
          v(k, p) = c * g - s * h;
          v(k, q) = s * g + c * h;
        }
      }
    }
  }

  SymmetricEigenDecomposition<Scalar> out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  // Selection sort on the diagonal; n is small.
  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, 1> order(n);
  for (Eigen::Index i = 0; i < n; ++i) order(i) = i;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = i;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (a(order(j), order(j)) < a(order(best), order(best))) best = j;
    }
    std::swap(order(i), order(best));
    out.values(i) = a(order(i), order(i));
    out.vectors.col(i) = v.col(order(i));
  }
  return out;
}

template <typename Scalar>
Scalar EigenMin(const SymMatrix<Scalar>& m) {
  return JacobiEigen(m).values(0);
}

template <typename Scalar>
Scalar EigenMax(const SymMatrix<Scalar>& m) {
  const auto eig = JacobiEigen(m);
  return eig.values(eig.values.size() - 1);
}

namespace internal {

template <typename Scalar>
void RequirePositiveDefinite(
    const SymmetricEigenDecomposition<Scalar>& eig, const char* op) {
  const Scalar lo = eig.values(0);
  const Scalar hi = eig.values(eig.values.size() - 1);
  if (!(hi > Scalar(0)) || !(lo > Scalar(kSingularityTolerance) * hi)) {
    throw RegularityError(std::string(op) +
                          ": regularity check failed (eigenvalues in [" +
                          std::to_string(static_cast<double>(lo)) + ", " +
                          std::to_string(static_cast<double>(hi)) + "])");
  }
}

// V f(Lambda) V^T for a spectral function f.
template <typename Scalar, typename F>
SymMatrix<Scalar> SpectralApply(const SymmetricEigenDecomposition<Scalar>& eig,
                                F f) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mapped = eig.values.unaryExpr(f);
  return SymMatrix<Scalar>(eig.vectors * mapped.asDiagonal() *
                           eig.vectors.transpose());
}

}  // namespace internal

template <typename Scalar>
SymMatrix<Scalar> Inverse(const SymMatrix<Scalar>& m) {
  const auto eig = JacobiEigen(m);
  internal::RequirePositiveDefinite(eig, "Inverse");
  return internal::SpectralApply(eig, [](Scalar x) { return Scalar(1) / x; });
}

template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> Solve(
    const SymMatrix<Scalar>& m, const Eigen::MatrixBase<Derived>& b) {
  if (b.size() != m.dim()) throw ValidationError("Solve: size mismatch");
  const auto eig = JacobiEigen(m);
  internal::RequirePositiveDefinite(eig, "Solve");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> coef =
      eig.vectors.transpose() * b;
  coef.array() /= eig.values.array();
  return eig.vectors * coef;
}

// Symmetric positive square root.
template <typename Scalar>
SymMatrix<Scalar> SqrtPsd(const SymMatrix<Scalar>& m) {
  const auto eig = JacobiEigen(m);
  internal::RequirePositiveDefinite(eig, "SqrtPsd");
  return internal::SpectralApply(eig,
                                 [](Scalar x) { return std::sqrt(x); });
}

template <typename Scalar>
SymMatrix<Scalar> InverseSqrtPsd(const SymMatrix<Scalar>& m) {
  const auto eig = JacobiEigen(m);
  internal::RequirePositiveDefinite(eig, "InverseSqrtPsd");
  return internal::SpectralApply(
      eig, [](Scalar x) { return Scalar(1) / std::sqrt(x); });
}

// Spectral (operator 2-) norm.
template <typename Scalar>
Scalar OperatorNorm(const SymMatrix<Scalar>& m) {
  const auto eig = JacobiEigen(m);
  return std::max(std::abs(eig.values(0)),
                  std::abs(eig.values(eig.values.size() - 1)));
}

// Largest singular value of a general (possibly rectangular) matrix.
template <typename Derived>
typename Derived::Scalar OperatorNorm(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Dense gram = a.transpose() * a;
  return std::sqrt(std::max(Scalar(0), EigenMax(SymMatrix<Scalar>(gram))));
}

}  // namespace dprobust

#endif  // DPROBUST_LINALG_H_

#pragma once

#include <cmath>
#include <stdexcept>

#include "apocalift/types.hpp"

namespace apocalift {

/// Thin SVD factors under one fixed convention shared by the whole library:
/// singular values nonincreasing, each left singular vector scaled so that its
/// largest-magnitude entry is positive (first index wins ties), right vectors
/// flipped along. Identical inputs therefore produce identical factors even
/// when the decomposition itself is not unique.
template <typename Scalar>
struct SvdFactors {
  MatrixX<Scalar> u;       // m x k, orthonormal columns
  VectorX<Scalar> sigma;   // k, nonincreasing, >= 0
  MatrixX<Scalar> v;       // n x k, orthonormal columns
  Index numerical_rank;    // #{ sigma_i > rank_tol * sigma_0 }, 0 if sigma_0 == 0

  MatrixX<Scalar> reconstruct() const {
    return u * sigma.asDiagonal() * v.transpose();
  }
};

template <typename Scalar>
Index numerical_rank(const VectorX<Scalar>& sigma, Scalar rank_tol) {
  if (sigma.size() == 0 || sigma(0) <= Scalar(0)) return 0;
  const Scalar cut = rank_tol * sigma(0);
  Index s = 0;
  while (s < sigma.size() && sigma(s) > cut) ++s;
  return s;
}

namespace detail {

template <typename Scalar>
void fix_singular_vector_signs(MatrixX<Scalar>& u, MatrixX<Scalar>& v) {
  for (Index i = 0; i < u.cols(); ++i) {
    Index arg = 0;
    Scalar best = std::abs(u(0, i));
    for (Index j = 1; j < u.rows(); ++j) {
      const Scalar a = std::abs(u(j, i));
      if (a > best) {
        best = a;
        arg = j;
      }
    }
    if (u(arg, i) < Scalar(0)) {
      u.col(i) = -u.col(i);
      v.col(i) = -v.col(i);
    }
  }
}

}  // namespace detail

template <typename Derived>
SvdFactors<typename Derived::Scalar> deterministic_svd(
    const Eigen::MatrixBase<Derived>& m,
    typename Derived::Scalar rank_tol = typename Derived::Scalar(kDefaultRankTol)) {
  using Scalar = typename Derived::Scalar;
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(m.eval(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdFactors<Scalar> f;
  f.u = svd.matrixU();
  f.sigma = svd.singularValues();
  f.v = svd.matrixV();
  detail::fix_singular_vector_signs(f.u, f.v);
  f.numerical_rank = numerical_rank<Scalar>(f.sigma, rank_tol);
  return f;
}

/// Nearest matrix of rank <= r in Frobenius norm (top r singular triples,
/// deterministic under the SVD convention above; ties at the truncation
/// boundary keep the first r triples in sorted order).
template <typename Derived>
MatrixX<typename Derived::Scalar> truncated_svd_projection(
    const Eigen::MatrixBase<Derived>& m, Index r) {
  using Scalar = typename Derived::Scalar;
  if (r < 0) throw std::invalid_argument("truncated_svd_projection: negative rank bound");
  if (r == 0) return MatrixX<Scalar>::Zero(m.rows(), m.cols());
  if (r >= std::min(m.rows(), m.cols())) return m;
  const SvdFactors<Scalar> f = deterministic_svd(m);
  return f.u.leftCols(r) * f.sigma.head(r).asDiagonal() * f.v.leftCols(r).transpose();
}

}  // namespace apocalift

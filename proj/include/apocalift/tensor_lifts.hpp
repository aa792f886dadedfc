#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "apocalift/svd.hpp"
#include "apocalift/tensor.hpp"
#include "apocalift/types.hpp"

namespace apocalift {

// ---------------------------------------------------------------------------
// Tucker parameterization and its HOSVD normalization.
// ---------------------------------------------------------------------------

template <typename Scalar>
struct TuckerParams {
  DenseTensor<Scalar> core;               // r_1 x ... x r_d
  std::vector<MatrixX<Scalar>> factors;   // n_k x r_k

  Scalar norm() const {
    Scalar sq = core.values().squaredNorm();
    for (const auto& f : factors) sq += f.squaredNorm();
    return std::sqrt(sq);
  }
};

template <typename Scalar>
DenseTensor<Scalar> tucker_apply(const TuckerParams<Scalar>& p) {
  if (static_cast<Index>(p.factors.size()) != p.core.order())
    throw std::invalid_argument("tucker_apply: one factor per mode required");
  DenseTensor<Scalar> t = p.core;
  for (Index k = 0; k < p.core.order(); ++k) t = mode_product(t, p.factors[k], k);
  return t;
}

/// Higher-order SVD: factor k holds the leading left singular vectors of the
/// mode-k flattening (deterministic SVD convention), the core is the
/// compression of the tensor by those bases. Inputs whose multilinear rank
/// exceeds `ranks` are rejected, so applying the result reproduces the input.
template <typename Scalar>
TuckerParams<Scalar> tucker_hosvd(const DenseTensor<Scalar>& t, const std::vector<Index>& ranks,
                                  Scalar rank_tol = Scalar(kDefaultRankTol)) {
  const Index d = t.order();
  if (static_cast<Index>(ranks.size()) != d)
    throw std::invalid_argument("tucker_hosvd: one rank per mode required");
  TuckerParams<Scalar> p;
  std::vector<MatrixX<Scalar>> transposed(d);
  for (Index k = 0; k < d; ++k) {
    const MatrixX<Scalar> flat = flatten(t, k);
    if (ranks[k] < 1 || ranks[k] > std::min(flat.rows(), flat.cols()))
      throw std::invalid_argument("tucker_hosvd: rank out of range for mode " +
                                  std::to_string(k));
    const SvdFactors<Scalar> f = deterministic_svd(flat, rank_tol);
    if (ranks[k] < f.sigma.size() &&
        f.sigma(ranks[k]) > rank_tol * f.sigma(0))
      throw std::runtime_error("tucker_hosvd: multilinear rank exceeds bound at mode " +
                               std::to_string(k));
    p.factors.push_back(f.u.leftCols(ranks[k]));
    transposed[k] = p.factors.back().transpose();
  }
  DenseTensor<Scalar> core = t;
  for (Index k = 0; k < d; ++k) core = mode_product(core, transposed[k], k);
  p.core = core;
  return p;
}

// ---------------------------------------------------------------------------
// Tensor-train parameterization and its TT-SVD normalization.
// ---------------------------------------------------------------------------

/// Cores G^(k) of shape r_{k-1} x n_k x r_k with r_0 = r_d = 1.
template <typename Scalar>
struct TTParams {
  std::vector<DenseTensor<Scalar>> cores;

  Scalar norm() const {
    Scalar sq = Scalar(0);
    for (const auto& c : cores) sq += c.values().squaredNorm();
    return std::sqrt(sq);
  }

  std::vector<Index> mode_dims() const {
    std::vector<Index> dims;
    for (const auto& c : cores) dims.push_back(c.dims()[1]);
    return dims;
  }

  std::vector<Index> bond_dims() const {  // r_1 .. r_{d-1}
    std::vector<Index> bonds;
    for (std::size_t k = 0; k + 1 < cores.size(); ++k) bonds.push_back(cores[k].dims()[2]);
    return bonds;
  }

  void validate() const {
    if (cores.empty()) throw std::invalid_argument("TTParams: no cores");
    if (cores.front().dims()[0] != 1 || cores.back().dims()[2] != 1)
      throw std::invalid_argument("TTParams: boundary bond dimensions must be 1");
    for (std::size_t k = 0; k + 1 < cores.size(); ++k) {
      if (cores[k].dims()[2] != cores[k + 1].dims()[0])
        throw std::invalid_argument("TTParams: bond dimension mismatch between cores");
    }
    for (const auto& c : cores) {
      if (c.order() != 3) throw std::invalid_argument("TTParams: cores must be three-way");
      if (c.dims()[2] > c.dims()[0] * c.dims()[1])
        throw std::invalid_argument("TTParams: bond exceeds r_{k-1} * n_k");
    }
  }
};

/// Contracts the train left to right via matrix products of core slices.
template <typename Scalar>
DenseTensor<Scalar> tt_apply(const TTParams<Scalar>& p) {
  p.validate();
  using RowMajor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto& first = p.cores.front();
  RowMajor acc = Eigen::Map<const RowMajor>(first.values().data(), first.dims()[1],
                                            first.dims()[2]);
  std::vector<Index> dims{first.dims()[1]};
  for (std::size_t k = 1; k < p.cores.size(); ++k) {
    const auto& core = p.cores[k];
    const Index rk_prev = core.dims()[0], nk = core.dims()[1], rk = core.dims()[2];
    const Eigen::Map<const RowMajor> gmat(core.values().data(), rk_prev, nk * rk);
    const RowMajor prod = acc * gmat;  // (prefix, n_k * r_k)
    acc = Eigen::Map<const RowMajor>(prod.data(), prod.rows() * nk, rk);
    dims.push_back(nk);
  }
  return DenseTensor<Scalar>(dims, VectorX<Scalar>(Eigen::Map<const VectorX<Scalar>>(
                                       acc.data(), acc.size())));
}

/// Sequential-SVD normalization: repeatedly matricize the working tensor,
/// keep the leading left singular vectors as the next core (deterministic SVD
/// convention), and push the remainder right. Reshaped cores 1..d-1 have
/// orthonormal columns and the working norm is carried entirely by the last
/// core. Inputs whose TT-rank exceeds `ranks` are rejected at the offending
/// stage.
template <typename Scalar>
TTParams<Scalar> tt_svd(const DenseTensor<Scalar>& t, const std::vector<Index>& ranks,
                        Scalar rank_tol = Scalar(kDefaultRankTol)) {
  using RowMajor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Index d = t.order();
  if (d < 2) throw std::invalid_argument("tt_svd: order must be at least 2");
  if (static_cast<Index>(ranks.size()) != d - 1)
    throw std::invalid_argument("tt_svd: needs d-1 bond ranks");
  TTParams<Scalar> p;
  Index r_prev = 1;
  RowMajor work =
      Eigen::Map<const RowMajor>(t.values().data(), t.dims()[0], t.size() / t.dims()[0]);
  for (Index k = 0; k + 1 < d; ++k) {
    const Index nk = t.dims()[k];
    const Index rk = ranks[k];
    if (rk < 1 || rk > std::min(work.rows(), work.cols()))
      throw std::invalid_argument("tt_svd: rank out of range at stage " + std::to_string(k + 1));
    const SvdFactors<Scalar> f = deterministic_svd(MatrixX<Scalar>(work), rank_tol);
    if (rk < f.sigma.size() && f.sigma(rk) > rank_tol * f.sigma(0))
      throw std::runtime_error("tt_svd: TT-rank exceeds bound at stage " + std::to_string(k + 1));
    const MatrixX<Scalar> u = f.u.leftCols(rk);
    const RowMajor u_row = u;
    p.cores.push_back(DenseTensor<Scalar>(
        {r_prev, nk, rk},
        VectorX<Scalar>(Eigen::Map<const VectorX<Scalar>>(u_row.data(), u_row.size()))));
    const MatrixX<Scalar> rest = u.transpose() * MatrixX<Scalar>(work);  // r_k x remaining
    const Index n_next = t.dims()[k + 1];
    const RowMajor rest_row = rest;
    work = Eigen::Map<const RowMajor>(rest_row.data(), rk * n_next,
                                      rest.cols() / n_next);
    r_prev = rk;
  }
  const RowMajor tail = work;
  p.cores.push_back(DenseTensor<Scalar>(
      {r_prev, t.dims()[d - 1], Index(1)},
      VectorX<Scalar>(Eigen::Map<const VectorX<Scalar>>(tail.data(), tail.size()))));
  p.validate();
  return p;
}

}  // namespace apocalift

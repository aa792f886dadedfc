#pragma once

#include <stdexcept>
#include <vector>

#include "apocalift/costs.hpp"
#include "apocalift/svd.hpp"
#include "apocalift/types.hpp"

namespace apocalift {

/// Everything needed to project onto the tangent cone of the bounded-rank
/// variety at a feasible point X: its thin SVD, the rank bound r and the
/// numerical rank s <= r. For s = r the cone is a linear space; for s < r it
/// contains every rank-1 matrix and its polar collapses to {0}.
template <typename Scalar>
struct TangentConeData {
  SvdFactors<Scalar> svd;
  Index r;
  Index m;
  Index n;

  Index s() const { return svd.numerical_rank; }
  Scalar sigma_r() const {
    return (r >= 1 && r <= svd.sigma.size()) ? svd.sigma(r - 1) : Scalar(0);
  }
};

template <typename Scalar>
TangentConeData<Scalar> tangent_cone_at(const MatrixX<Scalar>& x, Index r,
                                        Scalar rank_tol = Scalar(kDefaultRankTol)) {
  if (!(rank_tol > Scalar(0) && rank_tol < Scalar(1)))
    throw std::invalid_argument("tangent_cone_at: rank_tol must lie in (0,1)");
  if (r < 0 || r > std::min(x.rows(), x.cols()))
    throw std::invalid_argument("tangent_cone_at: rank bound out of range");
  TangentConeData<Scalar> t{deterministic_svd(x, rank_tol), r, x.rows(), x.cols()};
  if (t.s() > r)
    throw std::runtime_error("tangent_cone_at: point is infeasible (numerical rank exceeds bound)");
  return t;
}

namespace detail {

template <typename Scalar>
void check_ambient_shape(const TangentConeData<Scalar>& t, const MatrixX<Scalar>& m) {
  if (m.rows() != t.m || m.cols() != t.n)
    throw std::invalid_argument("tangent cone: ambient shape mismatch");
}

// Component of M with both factors orthogonal to the base point:
// (I - P_col) M (I - P_row).
template <typename Scalar>
MatrixX<Scalar> orthogonal_corner(const TangentConeData<Scalar>& t, const MatrixX<Scalar>& m) {
  const Index s = t.s();
  const auto us = t.svd.u.leftCols(s);
  const auto vs = t.svd.v.leftCols(s);
  const MatrixX<Scalar> tmp = m - us * (us.transpose() * m);
  return tmp - (tmp * vs) * vs.transpose();
}

}  // namespace detail

template <typename Scalar>
struct TangentProjection {
  MatrixX<Scalar> point;
  Scalar norm;
};

/// Metric projection of M onto the tangent cone at the base point of `t`:
/// keep the components interacting with the column/row spaces of X, and
/// replace the fully orthogonal corner by its best rank-(r-s) approximation.
/// The returned norm uses the split |P|^2 = |M - B|^2 + |trunc(B)|^2 with B
/// the orthogonal corner.
template <typename Scalar>
TangentProjection<Scalar> project_tangent_cone(const TangentConeData<Scalar>& t,
                                               const MatrixX<Scalar>& m) {
  detail::check_ambient_shape(t, m);
  const MatrixX<Scalar> b = detail::orthogonal_corner(t, m);
  const MatrixX<Scalar> b_trunc = truncated_svd_projection(b, t.r - t.s());
  TangentProjection<Scalar> p;
  p.point = m - b + b_trunc;
  p.norm = std::sqrt((m - b).squaredNorm() + b_trunc.squaredNorm());
  return p;
}

/// Projection onto the polar of the tangent cone: {0} when s < r, otherwise
/// the orthogonal complement of the tangent space.
template <typename Scalar>
MatrixX<Scalar> polar_tangent_cone_projection(const TangentConeData<Scalar>& t,
                                              const MatrixX<Scalar>& m) {
  detail::check_ambient_shape(t, m);
  if (t.s() < t.r) return MatrixX<Scalar>::Zero(t.m, t.n);
  return detail::orthogonal_corner(t, m);
}

template <typename Scalar>
struct StationarityReport {
  Scalar mu1;        // |Proj_{T_X}(-grad f)|
  Scalar mu2;        // dist(-grad f, polar of T_X)
  Scalar grad_norm;  // |grad f(X)|
  Scalar sigma_r;    // r-th singular value of X (0 when rank < r)
};

template <typename Scalar>
StationarityReport<Scalar> stationarity_report(const MatrixX<Scalar>& x, Index r,
                                               const CostModel<Scalar>& cost,
                                               Scalar rank_tol = Scalar(kDefaultRankTol)) {
  const TangentConeData<Scalar> t = tangent_cone_at(x, r, rank_tol);
  const MatrixX<Scalar> neg_grad = -cost.grad(x);
  StationarityReport<Scalar> rep;
  rep.grad_norm = neg_grad.norm();
  rep.mu1 = project_tangent_cone(t, neg_grad).norm;
  rep.mu2 = t.s() < t.r
                ? rep.grad_norm
                : (neg_grad - polar_tangent_cone_projection(t, neg_grad)).norm();
  rep.sigma_r = t.sigma_r();
  return rep;
}

enum class LimitBehavior { apocalypse_like, serendipity_like, regular };

/// Diagnostic for a convergent feasible sequence: are the stationarity
/// measures collapsing while the limit stays non-stationary (apocalypse-like),
/// or staying bounded away while the limit is stationary (serendipity-like)?
/// The thresholds are heuristic, not a theorem: the tail is the last quarter
/// of the sequence, and the limit measure must clear a factor of 10 on either
/// side to count.
template <typename Scalar>
struct LimitClassification {
  LimitBehavior behavior;
  std::vector<Scalar> sequence_mu1;
  Scalar limit_mu1;
  // |Proj_{T_{x_k}}(-grad f(limit))| per point; along an apocalypse this
  // vanishes even though the limit's own measure does not.
  std::vector<Scalar> limit_gradient_projection;
};

template <typename Scalar>
LimitClassification<Scalar> classify_limit_behavior(
    const std::vector<MatrixX<Scalar>>& sequence, const MatrixX<Scalar>& limit, Index r,
    const CostModel<Scalar>& cost, Scalar eps,
    Scalar rank_tol = Scalar(kDefaultRankTol)) {
  if (sequence.empty())
    throw std::invalid_argument("classify_limit_behavior: empty sequence");
  LimitClassification<Scalar> out;
  const MatrixX<Scalar> neg_grad_limit = -cost.grad(limit);
  for (const auto& x : sequence) {
    const TangentConeData<Scalar> t = tangent_cone_at(x, r, rank_tol);
    out.sequence_mu1.push_back(project_tangent_cone(t, MatrixX<Scalar>(-cost.grad(x))).norm);
    out.limit_gradient_projection.push_back(project_tangent_cone(t, neg_grad_limit).norm);
  }
  out.limit_mu1 = stationarity_report(limit, r, cost, rank_tol).mu1;

  const std::size_t n = out.sequence_mu1.size();
  const std::size_t tail_start = n - std::max<std::size_t>(1, n / 4);
  bool tail_below = true;
  for (std::size_t i = tail_start; i < n; ++i) tail_below &= (out.sequence_mu1[i] < eps);
  bool all_above = true;
  for (Scalar mu : out.sequence_mu1) all_above &= (mu > eps);

  if (tail_below && out.limit_mu1 > Scalar(10) * eps)
    out.behavior = LimitBehavior::apocalypse_like;
  else if (all_above && out.limit_mu1 < eps / Scalar(10))
    out.behavior = LimitBehavior::serendipity_like;
  else
    out.behavior = LimitBehavior::regular;
  return out;
}

}  // namespace apocalift

#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "apocalift/bounded_rank.hpp"
#include "apocalift/costs.hpp"
#include "apocalift/svd.hpp"
#include "apocalift/types.hpp"

namespace apocalift {

// ---------------------------------------------------------------------------
// LR lift: phi(L, R) = L R^T on the Euclidean space of factor pairs.
// ---------------------------------------------------------------------------

template <typename Scalar>
struct LrPoint {
  MatrixX<Scalar> l;  // m x r
  MatrixX<Scalar> r;  // n x r
};

template <typename Scalar>
struct LrTangent {
  MatrixX<Scalar> dl;
  MatrixX<Scalar> dr;
};

/// Parameterization of the bounded-rank variety by unconstrained factor
/// pairs. The manifold is flat, so the retraction is a straight line and the
/// pullback Hessian at the origin is exact. Its fibers are unbounded, which is
/// why the rebalancing hook matters.
template <typename Scalar>
class LrLift {
 public:
  using ScalarType = Scalar;
  using Point = LrPoint<Scalar>;
  using Tangent = LrTangent<Scalar>;

  LrLift(Index m, Index n, Index r) : m_(m), n_(n), r_(r) {
    if (m <= 0 || n <= 0 || r <= 0 || r > std::min(m, n))
      throw std::invalid_argument("LrLift: invalid shape");
  }

  Index ambient_rows() const { return m_; }
  Index ambient_cols() const { return n_; }
  Index rank_bound() const { return r_; }
  Index tangent_dim() const { return (m_ + n_) * r_; }

  void check_point(const Point& y) const {
    if (y.l.rows() != m_ || y.l.cols() != r_ || y.r.rows() != n_ || y.r.cols() != r_)
      throw std::invalid_argument("LrLift: point shape mismatch");
  }

  MatrixX<Scalar> apply(const Point& y) const {
    check_point(y);
    return y.l * y.r.transpose();
  }

  /// Sectional rebalancing map: factor the image through its deterministic
  /// thin SVD of size r and split the singular values evenly. Output depends
  /// on the point only through phi(y), and satisfies L^T L = R^T R.
  Point rebalance(const Point& y) const {
    const SvdFactors<Scalar> f = deterministic_svd(apply(y));
    const VectorX<Scalar> root = f.sigma.head(r_).array().sqrt().matrix();
    return Point{f.u.leftCols(r_) * root.asDiagonal(), f.v.leftCols(r_) * root.asDiagonal()};
  }

  Point retract(const Point& y, const Tangent& s) const {
    return Point{y.l + s.dl, y.r + s.dr};
  }

  Scalar inner(const Tangent& a, const Tangent& b) const {
    return a.dl.cwiseProduct(b.dl).sum() + a.dr.cwiseProduct(b.dr).sum();
  }

  Tangent gradient(const Point& y, const CostModel<Scalar>& cost) const {
    const MatrixX<Scalar> g = cost.grad(apply(y));
    return Tangent{g * y.r, g.transpose() * y.l};
  }

  Tangent hess_vec(const Point& y, const CostModel<Scalar>& cost, const Tangent& s) const {
    const MatrixX<Scalar> x = apply(y);
    const MatrixX<Scalar> g = cost.grad(x);
    const MatrixX<Scalar> delta = s.dl * y.r.transpose() + y.l * s.dr.transpose();
    const MatrixX<Scalar> hd = cost.hess_vec(x, delta);
    return Tangent{hd * y.r + g * s.dr, hd.transpose() * y.l + g.transpose() * s.dl};
  }

  Tangent zero_tangent(const Point&) const {
    return Tangent{MatrixX<Scalar>::Zero(m_, r_), MatrixX<Scalar>::Zero(n_, r_)};
  }

  Tangent scale(const Tangent& s, Scalar a) const { return Tangent{a * s.dl, a * s.dr}; }

  Tangent add_scaled(const Tangent& a, const Tangent& b, Scalar t) const {
    return Tangent{a.dl + t * b.dl, a.dr + t * b.dr};
  }

  /// Orthonormal coordinate basis: the dl entries first (column-major), then
  /// the dr entries.
  Tangent basis_vector(const Point&, Index i) const {
    Tangent t{MatrixX<Scalar>::Zero(m_, r_), MatrixX<Scalar>::Zero(n_, r_)};
    if (i < m_ * r_)
      t.dl(i % m_, i / m_) = Scalar(1);
    else {
      const Index j = i - m_ * r_;
      t.dr(j % n_, j / n_) = Scalar(1);
    }
    return t;
  }

  Tangent from_coords(const Point&, const VectorX<Scalar>& c) const {
    Tangent t{MatrixX<Scalar>::Zero(m_, r_), MatrixX<Scalar>::Zero(n_, r_)};
    t.dl = Eigen::Map<const MatrixX<Scalar>>(c.data(), m_, r_);
    t.dr = Eigen::Map<const MatrixX<Scalar>>(c.data() + m_ * r_, n_, r_);
    return t;
  }

 private:
  Index m_, n_, r_;
};

// ---------------------------------------------------------------------------
// Stiefel lift: phi(U, W) = U W^T with U orthonormal. The lift is proper, so
// the identity hook suffices.
// ---------------------------------------------------------------------------

template <typename Scalar>
struct StiefelPoint {
  MatrixX<Scalar> u;  // m x r, orthonormal columns
  MatrixX<Scalar> w;  // n x r
};

template <typename Scalar>
struct StiefelTangent {
  MatrixX<Scalar> du;  // U^T dU skew-symmetric
  MatrixX<Scalar> dw;
};

template <typename Scalar>
class StiefelLift {
 public:
  using ScalarType = Scalar;
  using Point = StiefelPoint<Scalar>;
  using Tangent = StiefelTangent<Scalar>;

  StiefelLift(Index m, Index n, Index r) : m_(m), n_(n), r_(r) {
    if (m <= 0 || n <= 0 || r <= 0 || r > std::min(m, n))
      throw std::invalid_argument("StiefelLift: invalid shape");
  }

  Index ambient_rows() const { return m_; }
  Index ambient_cols() const { return n_; }
  Index rank_bound() const { return r_; }
  Index tangent_dim() const { return r_ * (r_ - 1) / 2 + (m_ - r_) * r_ + n_ * r_; }

  void check_point(const Point& y) const {
    if (y.u.rows() != m_ || y.u.cols() != r_ || y.w.rows() != n_ || y.w.cols() != r_)
      throw std::invalid_argument("StiefelLift: point shape mismatch");
    if ((y.u.transpose() * y.u - MatrixX<Scalar>::Identity(r_, r_)).norm() > Scalar(1e-10))
      throw std::invalid_argument("StiefelLift: U is not orthonormal");
  }

  void check_tangent(const Point& y, const Tangent& s) const {
    const MatrixX<Scalar> k = y.u.transpose() * s.du;
    if ((k + k.transpose()).norm() > Scalar(1e-8) * (Scalar(1) + s.du.norm()))
      throw std::invalid_argument("StiefelLift: dU violates the tangency condition");
  }

  MatrixX<Scalar> apply(const Point& y) const {
    check_point(y);
    return y.u * y.w.transpose();
  }

  Point rebalance(const Point& y) const { return y; }  // phi is proper

  /// Metric-projection (polar) retraction on the Stiefel factor; this is a
  /// second-order retraction, so the pullback Hessian at the origin equals
  /// the Riemannian Hessian.
  Point retract(const Point& y, const Tangent& s) const {
    const MatrixX<Scalar> a = y.u + s.du;
    Eigen::JacobiSVD<MatrixX<Scalar>> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return Point{svd.matrixU() * svd.matrixV().transpose(), y.w + s.dw};
  }

  Scalar inner(const Tangent& a, const Tangent& b) const {
    return a.du.cwiseProduct(b.du).sum() + a.dw.cwiseProduct(b.dw).sum();
  }

  Tangent project_tangent(const Point& y, const MatrixX<Scalar>& zu,
                          const MatrixX<Scalar>& zw) const {
    const MatrixX<Scalar> utz = y.u.transpose() * zu;
    return Tangent{zu - y.u * ((utz + utz.transpose()) / Scalar(2)), zw};
  }

  Tangent gradient(const Point& y, const CostModel<Scalar>& cost) const {
    const MatrixX<Scalar> g = cost.grad(apply(y));
    return project_tangent(y, g * y.w, g.transpose() * y.u);
  }

  /// Riemannian Hessian via the projected derivative of the gradient field
  /// with the Weingarten correction -dU sym(U^T Gbar) on the Stiefel factor.
  Tangent hess_vec(const Point& y, const CostModel<Scalar>& cost, const Tangent& s) const {
    check_tangent(y, s);
    const MatrixX<Scalar> x = apply(y);
    const MatrixX<Scalar> g = cost.grad(x);
    const MatrixX<Scalar> delta = s.du * y.w.transpose() + y.u * s.dw.transpose();
    const MatrixX<Scalar> hd = cost.hess_vec(x, delta);
    const MatrixX<Scalar> gbar_u = g * y.w;
    const MatrixX<Scalar> utg = y.u.transpose() * gbar_u;
    const MatrixX<Scalar> du_dot =
        hd * y.w + g * s.dw - s.du * ((utg + utg.transpose()) / Scalar(2));
    return project_tangent(y, du_dot, hd.transpose() * y.u + g.transpose() * s.du);
  }

  Tangent zero_tangent(const Point&) const {
    return Tangent{MatrixX<Scalar>::Zero(m_, r_), MatrixX<Scalar>::Zero(n_, r_)};
  }

  Tangent scale(const Tangent& s, Scalar a) const { return Tangent{a * s.du, a * s.dw}; }

  Tangent add_scaled(const Tangent& a, const Tangent& b, Scalar t) const {
    return Tangent{a.du + t * b.du, a.dw + t * b.dw};
  }

  /// Orthonormal basis of the tangent space: scaled skew directions U A_ij,
  /// then the complement directions U_perp E_kl, then the Euclidean W block.
  Tangent basis_vector(const Point& y, Index i) const {
    const Index n_skew = r_ * (r_ - 1) / 2;
    const Index n_perp = (m_ - r_) * r_;
    Tangent t{MatrixX<Scalar>::Zero(m_, r_), MatrixX<Scalar>::Zero(n_, r_)};
    if (i < n_skew) {
      Index idx = i;
      Index a = 0;
      while (idx >= r_ - 1 - a) {
        idx -= r_ - 1 - a;
        ++a;
      }
      const Index b = a + 1 + idx;
      const Scalar inv_sqrt2 = Scalar(1) / std::sqrt(Scalar(2));
      MatrixX<Scalar> skew = MatrixX<Scalar>::Zero(r_, r_);
      skew(a, b) = inv_sqrt2;
      skew(b, a) = -inv_sqrt2;
      t.du = y.u * skew;
    } else if (i < n_skew + n_perp) {
      const Index j = i - n_skew;
      t.du.col(j / (m_ - r_)) = orthonormal_complement(y).col(j % (m_ - r_));
    } else {
      const Index j = i - n_skew - n_perp;
      t.dw(j % n_, j / n_) = Scalar(1);
    }
    return t;
  }

  Tangent from_coords(const Point& y, const VectorX<Scalar>& c) const {
    Tangent t = zero_tangent(y);
    for (Index i = 0; i < c.size(); ++i) {
      if (c(i) == Scalar(0)) continue;
      const Tangent b = basis_vector(y, i);
      t.du += c(i) * b.du;
      t.dw += c(i) * b.dw;
    }
    return t;
  }

 private:
  MatrixX<Scalar> orthonormal_complement(const Point& y) const {
    Eigen::HouseholderQR<MatrixX<Scalar>> qr(y.u);
    const MatrixX<Scalar> q = qr.householderQ() * MatrixX<Scalar>::Identity(m_, m_);
    return q.rightCols(m_ - r_);
  }

  Index m_, n_, r_;
};

// ---------------------------------------------------------------------------
// Pullback of a cost through a lift, plus the dense tangent-space Hessian
// used for leftmost-eigenpair computations.
// ---------------------------------------------------------------------------

inline constexpr Index kMaxDenseHessianDim = 400;

template <typename Lift>
class Pullback {
 public:
  using Scalar = typename Lift::ScalarType;
  using Point = typename Lift::Point;
  using Tangent = typename Lift::Tangent;

  Pullback(Lift lift, CostModel<Scalar> cost) : lift_(std::move(lift)), cost_(std::move(cost)) {}

  const Lift& lift() const { return lift_; }
  const CostModel<Scalar>& cost() const { return cost_; }

  Scalar value(const Point& y) const { return cost_.eval(lift_.apply(y)); }
  Tangent gradient(const Point& y) const { return lift_.gradient(y, cost_); }
  Tangent hess_vec(const Point& y, const Tangent& s) const {
    return lift_.hess_vec(y, cost_, s);
  }
  Point retract(const Point& y, const Tangent& s) const { return lift_.retract(y, s); }
  Scalar inner(const Tangent& a, const Tangent& b) const { return lift_.inner(a, b); }

  /// Pullback Hessian at the origin of T_y M, materialized in an orthonormal
  /// tangent basis. Dense eigendecomposition is the point, so the dimension
  /// is capped.
  MatrixX<Scalar> dense_hessian(const Point& y) const {
    const Index d = lift_.tangent_dim();
    if (d > kMaxDenseHessianDim)
      throw std::runtime_error(
          "Pullback: tangent dimension exceeds the dense-Hessian cap (400); "
          "use a smaller problem or a matrix-free eigensolver");
    std::vector<Tangent> basis;
    basis.reserve(d);
    for (Index i = 0; i < d; ++i) basis.push_back(lift_.basis_vector(y, i));
    MatrixX<Scalar> h(d, d);
    for (Index j = 0; j < d; ++j) {
      const Tangent hj = hess_vec(y, basis[j]);
      for (Index i = 0; i < d; ++i) h(i, j) = lift_.inner(basis[i], hj);
    }
    return (h + h.transpose()) / Scalar(2);
  }

 private:
  Lift lift_;
  CostModel<Scalar> cost_;
};

// ---------------------------------------------------------------------------
// Certification: stationarity bounds on the variety from approximate
// second-order criticality of a balanced factor pair.
// ---------------------------------------------------------------------------

template <typename Scalar>
struct StationarityBounds {
  Scalar bound_op;    // on |grad f(X)|_op
  Scalar bound_proj;  // on |Proj_{T_X}(-grad f(X))|
};

/// For a balanced pair (L^T L = R^T R) that is (eps1, eps2)-approximately
/// 2-critical for the pulled-back cost, bounds the operator norm of the
/// ambient gradient and the tangent-cone stationarity measure at X = L R^T.
/// The eps1 route degrades as sigma_r(X) -> 0 and is +inf when rank(X) < r.
template <typename Scalar>
StationarityBounds<Scalar> certify_stationarity(const LrPoint<Scalar>& y,
                                                const CostModel<Scalar>& cost, Scalar eps1,
                                                Scalar eps2,
                                                Scalar rank_tol = Scalar(kDefaultRankTol)) {
  if (!cost.lipschitz_grad)
    throw std::invalid_argument("certify_stationarity: cost has no gradient Lipschitz constant");
  if (y.l.cols() != y.r.cols() || y.l.cols() < 1 ||
      y.l.cols() > std::min(y.l.rows(), y.r.rows()))
    throw std::invalid_argument("certify_stationarity: malformed factor pair");
  const MatrixX<Scalar> ll = y.l.transpose() * y.l;
  const MatrixX<Scalar> rr = y.r.transpose() * y.r;
  if ((ll - rr).norm() > Scalar(1e-8) * std::max(Scalar(1), ll.norm()))
    throw std::invalid_argument("certify_stationarity: factors are not balanced");

  const Scalar lf = *cost.lipschitz_grad;
  const MatrixX<Scalar> x = y.l * y.r.transpose();
  const Index r = y.l.cols();
  const SvdFactors<Scalar> xf = deterministic_svd(x, rank_tol);
  const Scalar sigma_r = (r <= xf.sigma.size()) ? xf.sigma(r - 1) : Scalar(0);
  const bool rank_deficient = xf.numerical_rank < r;

  const SvdFactors<Scalar> gf = deterministic_svd(MatrixX<Scalar>(cost.grad(x)), rank_tol);
  const Scalar grad_rank = Scalar(gf.numerical_rank);

  StationarityBounds<Scalar> b;
  b.bound_op = eps2 + Scalar(2) * lf * sigma_r;
  const Scalar via_grad =
      rank_deficient ? std::numeric_limits<Scalar>::infinity()
                     : std::sqrt(Scalar(2) / sigma_r) * eps1;
  b.bound_proj = std::min(via_grad, std::sqrt(grad_rank) * b.bound_op);
  return b;
}

}  // namespace apocalift

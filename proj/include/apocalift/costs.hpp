#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>

#include "apocalift/types.hpp"

namespace apocalift {

/// Smooth cost on the ambient matrix space: value, Euclidean gradient, and
/// Hessian-vector product. Implementations must be re-entrant (no hidden
/// mutable state). `lipschitz_grad` is a gradient Lipschitz constant valid on
/// the region a solver sweeps; certification requires it.
template <typename Scalar>
struct CostModel {
  std::function<Scalar(const MatrixX<Scalar>&)> eval;
  std::function<MatrixX<Scalar>(const MatrixX<Scalar>&)> grad;
  std::function<MatrixX<Scalar>(const MatrixX<Scalar>&, const MatrixX<Scalar>&)> hess_vec;
  std::optional<Scalar> lipschitz_grad;
};

/// The 3x3 cost whose projected-gradient iterates stall against a rank-drop:
/// a strictly convex quadratic in the upper-left 2x2 block plus a double-well
/// quartic in the (3,3) entry. All other entries are unused.
///
///   f(X) = 1/2 |D (Y - Y*)|^2 - (x+1)^2/2 + x^4/4,
///   Y = X(1:2,1:2),  x = X(3,3),  D = diag(1, 1/2),  Y* = diag(1, 0).
///
/// The attached Lipschitz constant 11 bounds the Hessian on |x| <= 2, which
/// contains the sublevel set of diag(2,1,0) swept by the canned experiments
/// (the quartic makes the gradient non-Lipschitz globally).
template <typename Scalar = double>
CostModel<Scalar> apocalypse_cost() {
  const auto check = [](const MatrixX<Scalar>& x) {
    if (x.rows() != 3 || x.cols() != 3)
      throw std::invalid_argument("apocalypse_cost: expects 3x3 input");
  };
  CostModel<Scalar> cost;
  cost.eval = [check](const MatrixX<Scalar>& x) {
    check(x);
    const Scalar q = Scalar(0.5) * ((x(0, 0) - Scalar(1)) * (x(0, 0) - Scalar(1)) + x(0, 1) * x(0, 1) +
                                    Scalar(0.25) * (x(1, 0) * x(1, 0) + x(1, 1) * x(1, 1)));
    const Scalar t = x(2, 2);
    return q - (t + Scalar(1)) * (t + Scalar(1)) / Scalar(2) + t * t * t * t / Scalar(4);
  };
  cost.grad = [check](const MatrixX<Scalar>& x) {
    check(x);
    MatrixX<Scalar> g = MatrixX<Scalar>::Zero(3, 3);
    g(0, 0) = x(0, 0) - Scalar(1);
    g(0, 1) = x(0, 1);
    g(1, 0) = Scalar(0.25) * x(1, 0);
    g(1, 1) = Scalar(0.25) * x(1, 1);
    const Scalar t = x(2, 2);
    g(2, 2) = -(t + Scalar(1)) + t * t * t;
    return g;
  };
  cost.hess_vec = [check](const MatrixX<Scalar>& x, const MatrixX<Scalar>& d) {
    check(x);
    check(d);
    MatrixX<Scalar> h = MatrixX<Scalar>::Zero(3, 3);
    h(0, 0) = d(0, 0);
    h(0, 1) = d(0, 1);
    h(1, 0) = Scalar(0.25) * d(1, 0);
    h(1, 1) = Scalar(0.25) * d(1, 1);
    h(2, 2) = (Scalar(3) * x(2, 2) * x(2, 2) - Scalar(1)) * d(2, 2);
    return h;
  };
  cost.lipschitz_grad = Scalar(11);
  return cost;
}

/// f(X) = u^T X v with constant gradient u v^T and zero Hessian.
template <typename Scalar>
CostModel<Scalar> linear_cost(const VectorX<Scalar>& u, const VectorX<Scalar>& v) {
  const MatrixX<Scalar> g = u * v.transpose();
  CostModel<Scalar> cost;
  cost.eval = [u, v](const MatrixX<Scalar>& x) { return u.dot(x * v); };
  cost.grad = [g](const MatrixX<Scalar>& x) {
    if (x.rows() != g.rows() || x.cols() != g.cols())
      throw std::invalid_argument("linear_cost: shape mismatch");
    return g;
  };
  cost.hess_vec = [](const MatrixX<Scalar>& x, const MatrixX<Scalar>&) {
    return MatrixX<Scalar>::Zero(x.rows(), x.cols()).eval();
  };
  cost.lipschitz_grad = Scalar(0);
  return cost;
}

/// f(X) = 1/2 |X - X0|^2, the identity-Hessian model problem.
template <typename Scalar>
CostModel<Scalar> quadratic_distance_cost(const MatrixX<Scalar>& x0) {
  CostModel<Scalar> cost;
  cost.eval = [x0](const MatrixX<Scalar>& x) { return Scalar(0.5) * (x - x0).squaredNorm(); };
  cost.grad = [x0](const MatrixX<Scalar>& x) { return (x - x0).eval(); };
  cost.hess_vec = [](const MatrixX<Scalar>&, const MatrixX<Scalar>& d) { return d; };
  cost.lipschitz_grad = Scalar(1);
  return cost;
}

}  // namespace apocalift

#pragma once

#include <limits>
#include <stdexcept>
#include <vector>

#include "apocalift/types.hpp"

namespace apocalift {

/// Closed cone given as a finite union of rays {a*z : a > 0} through the
/// origin, one ray per column of `generators`.
template <typename Scalar>
struct RayCone {
  MatrixX<Scalar> generators;  // d x k, every column nonzero

  Index dimension() const { return generators.rows(); }
  Index ray_count() const { return generators.cols(); }

  void validate() const {
    if (generators.rows() <= 0) throw std::invalid_argument("RayCone: dimension must be positive");
    for (Index i = 0; i < generators.cols(); ++i) {
      if (generators.col(i).norm() <= Scalar(0))
        throw std::invalid_argument("RayCone: zero generator");
    }
  }
};

template <typename Scalar>
struct ConeProjection {
  VectorX<Scalar> point;  // one minimizing projection (deterministic choice)
  Scalar norm;            // shared by all minimizing projections
  Scalar inner_vu;        // <v, point>, equals norm^2
};

namespace detail {

template <typename Scalar>
void check_cone_dimension(const RayCone<Scalar>& cone, const VectorX<Scalar>& x) {
  if (x.size() != cone.dimension())
    throw std::invalid_argument("RayCone: vector dimension mismatch");
}

}  // namespace detail

/// Projection of v onto the union of rays: best per-ray projection
/// y_i = max(0, <v, z_i>/|z_i|) z_i/|z_i|, ties broken by lowest ray index.
template <typename Scalar>
ConeProjection<Scalar> project_ray_cone(const RayCone<Scalar>& cone, const VectorX<Scalar>& v) {
  cone.validate();
  detail::check_cone_dimension(cone, v);
  ConeProjection<Scalar> best{VectorX<Scalar>::Zero(v.size()), Scalar(0), Scalar(0)};
  Scalar best_dist = v.norm();
  for (Index i = 0; i < cone.ray_count(); ++i) {
    const VectorX<Scalar> z = cone.generators.col(i).normalized();
    const Scalar a = std::max(Scalar(0), z.dot(v));
    const VectorX<Scalar> y = a * z;
    const Scalar dist = (v - y).norm();
    if (dist < best_dist) {
      best_dist = dist;
      best.point = y;
      best.norm = a;
      best.inner_vu = v.dot(y);
    }
  }
  return best;
}

/// w is in the polar of the cone iff <w, z_i> <= tol |w| |z_i| for every ray.
template <typename Scalar>
bool polar_membership_ray_cone(const RayCone<Scalar>& cone, const VectorX<Scalar>& w,
                               Scalar tol) {
  cone.validate();
  detail::check_cone_dimension(cone, w);
  if (tol < Scalar(0)) throw std::invalid_argument("polar_membership_ray_cone: tol < 0");
  const Scalar wn = w.norm();
  for (Index i = 0; i < cone.ray_count(); ++i) {
    if (w.dot(cone.generators.col(i)) > tol * wn * cone.generators.col(i).norm()) return false;
  }
  return true;
}

/// Projection onto the convex cone of nonnegative combinations of the
/// generators, by exhaustive enumeration of linearly independent generator
/// subsets. Any projection onto a finitely generated convex cone is a
/// nonnegative combination of some independent subset, so the search is exact.
template <typename Scalar>
VectorX<Scalar> project_convex_hull_cone(const RayCone<Scalar>& cone, const VectorX<Scalar>& v) {
  cone.validate();
  detail::check_cone_dimension(cone, v);
  const Index k = cone.ray_count();
  if (k > 8)
    throw std::invalid_argument(
        "project_convex_hull_cone: subset enumeration capped at 8 generators");
  VectorX<Scalar> best = VectorX<Scalar>::Zero(v.size());
  Scalar best_dist = v.norm();
  const Scalar coeff_slack = Scalar(-1e-12);
  std::vector<Index> pick;
  for (unsigned mask = 1; mask < (1u << k); ++mask) {
    pick.clear();
    for (Index i = 0; i < k; ++i)
      if (mask & (1u << i)) pick.push_back(i);
    MatrixX<Scalar> z(v.size(), static_cast<Index>(pick.size()));
    for (Index j = 0; j < z.cols(); ++j) z.col(j) = cone.generators.col(pick[j]);
    Eigen::CompleteOrthogonalDecomposition<MatrixX<Scalar>> cod(z);
    if (cod.rank() != z.cols()) continue;  // its cone is covered by independent subsets
    const VectorX<Scalar> c = cod.solve(v);
    if ((c.array() < coeff_slack).any()) continue;
    const VectorX<Scalar> y = z * c;
    const Scalar dist = (v - y).norm();
    if (dist < best_dist) {
      best_dist = dist;
      best = y;
    }
  }
  return best;
}

template <typename Scalar>
struct MuMeasures {
  Scalar mu1;  // norm of the projection onto the cone itself
  Scalar mu2;  // distance to the polar, via the closed convex hull
};

/// The two measures of approximate stationarity attached to a cone: mu1 is
/// the norm of Proj_K(v); mu2 = dist(v, K°), computed as the norm of the
/// projection of v onto the closed convex hull of K.
template <typename Scalar>
MuMeasures<Scalar> mu_measures_ray_cone(const RayCone<Scalar>& cone, const VectorX<Scalar>& v) {
  return MuMeasures<Scalar>{project_ray_cone(cone, v).norm,
                            project_convex_hull_cone(cone, v).norm()};
}

}  // namespace apocalift

#pragma once

#include <Eigen/Dense>

namespace apocalift {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Relative threshold separating numerically nonzero singular values from
// noise. The CLI lets APOCALIFT_RANK_TOL override it per process.
inline constexpr double kDefaultRankTol = 1e-10;

}  // namespace apocalift

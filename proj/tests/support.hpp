#pragma once

// Shared test utilities: seeded random data, independent oracles for SVD and
// line minimization, and finite-difference checks. Oracles here must not
// reuse the code paths they are checking.

#include <cmath>
#include <functional>
#include <random>

#include "apocalift/costs.hpp"
#include "apocalift/types.hpp"

namespace testsupport {

using apocalift::Index;
using Matrix = apocalift::MatrixX<double>;
using Vector = apocalift::VectorX<double>;

inline Matrix gaussian(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

inline Vector gaussian_vector(Index size, std::mt19937_64& rng) {
  return gaussian(size, 1, rng);
}

inline Matrix orthonormal(Index rows, Index cols, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Matrix> qr(gaussian(rows, cols, rng));
  return Matrix(qr.householderQ() * Matrix::Identity(rows, cols));
}

// Random matrix of exact rank s with singular values spread over [0.5, 2].
inline Matrix random_rank(Index rows, Index cols, Index s, std::mt19937_64& rng) {
  if (s == 0) return Matrix::Zero(rows, cols);
  std::uniform_real_distribution<double> unif(0.5, 2.0);
  Vector sigma(s);
  for (Index i = 0; i < s; ++i) sigma(i) = unif(rng);
  std::sort(sigma.data(), sigma.data() + s, std::greater<double>());
  return orthonormal(rows, s, rng) * sigma.asDiagonal() * orthonormal(cols, s, rng).transpose();
}

// Independent SVD route: eigendecomposition of the Gram matrix. Only used to
// cross-check the production JacobiSVD-based path.
struct OracleSvd {
  Matrix u;
  Vector sigma;
  Matrix v;
};

inline OracleSvd svd_via_gram(const Matrix& m) {
  const Matrix gram = m.transpose() * m;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const Index k = gram.rows();
  OracleSvd out;
  out.sigma = Vector(k);
  out.v = Matrix(k, k);
  for (Index i = 0; i < k; ++i) {  // eigenvalues come ascending; reverse
    const double lambda = std::max(0.0, eig.eigenvalues()(k - 1 - i));
    out.sigma(i) = std::sqrt(lambda);
    out.v.col(i) = eig.eigenvectors().col(k - 1 - i);
  }
  out.u = Matrix::Zero(m.rows(), k);
  for (Index i = 0; i < k; ++i)
    if (out.sigma(i) > 1e-12) out.u.col(i) = m * out.v.col(i) / out.sigma(i);
  return out;
}

inline Matrix truncate_via_gram(const Matrix& m, Index r) {
  const OracleSvd o = svd_via_gram(m);
  Matrix out = Matrix::Zero(m.rows(), m.cols());
  for (Index i = 0; i < std::min(r, o.sigma.size()); ++i)
    out += o.sigma(i) * o.u.col(i) * o.v.col(i).transpose();
  return out;
}

// Bisection for a sign-changing continuous function.
inline double bisect(const std::function<double(double)>& f, double lo, double hi,
                     int iters = 200) {
  double flo = f(lo);
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fmid = f(mid);
    if ((flo <= 0) == (fmid <= 0)) {
      lo = mid;
      flo = fmid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Gradient consistency by central differences along random directions.
inline double max_gradient_fd_error(const apocalift::CostModel<double>& cost, const Matrix& x,
                                    std::mt19937_64& rng, int directions = 20) {
  const double h = 1e-5 * (1.0 + x.norm());
  const Matrix g = cost.grad(x);
  double worst = 0.0;
  for (int i = 0; i < directions; ++i) {
    Matrix d = gaussian(x.rows(), x.cols(), rng);
    d /= d.norm();
    const double fd = (cost.eval(x + h * d) - cost.eval(x - h * d)) / (2 * h);
    const double an = g.cwiseProduct(d).sum();
    worst = std::max(worst, std::abs(fd - an) / std::max(1.0, std::abs(an)));
  }
  return worst;
}

// Hessian-vector product symmetry: <H[a], b> vs <H[b], a>.
inline double max_hvp_asymmetry(const apocalift::CostModel<double>& cost, const Matrix& x,
                                std::mt19937_64& rng, int pairs = 10) {
  double worst = 0.0;
  for (int i = 0; i < pairs; ++i) {
    const Matrix a = gaussian(x.rows(), x.cols(), rng);
    const Matrix b = gaussian(x.rows(), x.cols(), rng);
    const double ab = cost.hess_vec(x, a).cwiseProduct(b).sum();
    const double ba = cost.hess_vec(x, b).cwiseProduct(a).sum();
    worst = std::max(worst, std::abs(ab - ba) / std::max(1.0, std::abs(ab)));
  }
  return worst;
}

}  // namespace testsupport

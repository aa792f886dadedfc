#include <doctest.h>

#include <cmath>
#include <random>

#include "apocalift/costs.hpp"
#include "support.hpp"

using namespace apocalift;
using testsupport::Matrix;
using testsupport::Vector;

namespace {

Matrix diag3(double a, double b, double c) {
  Matrix m = Matrix::Zero(3, 3);
  m.diagonal() << a, b, c;
  return m;
}

}  // namespace

TEST_CASE("stalled-descent cost values and gradient blocks") {
  const CostModel<double> cost = apocalypse_cost<double>();
  // Q(diag(2,1)) = 1/2 (1 + 1/4) = 5/8, quartic part at 0 is -1/2
  CHECK(cost.eval(diag3(2, 1, 0)) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(cost.eval(diag3(1, 0, 0)) == doctest::Approx(-0.5));

  std::mt19937_64 rng(31);
  for (int i = 0; i < 10; ++i) {
    Matrix x = Matrix::Zero(3, 3);
    x.topLeftCorner(2, 2) = testsupport::gaussian(2, 2, rng);
    const Matrix g = cost.grad(x);
    CHECK(g(0, 0) == doctest::Approx(x(0, 0) - 1));
    CHECK(g(0, 1) == doctest::Approx(x(0, 1)));
    CHECK(g(1, 0) == doctest::Approx(0.25 * x(1, 0)));
    CHECK(g(1, 1) == doctest::Approx(0.25 * x(1, 1)));
    CHECK(g(2, 2) == doctest::Approx(-1.0));
    CHECK(g(0, 2) == 0.0);
    CHECK(g(2, 0) == 0.0);
  }
}

TEST_CASE("the global minimizer sits at the root of the depressed cubic") {
  const CostModel<double> cost = apocalypse_cost<double>();
  const double x0 = testsupport::bisect([](double x) { return x * x * x - x - 1; }, 1.0, 2.0);
  CHECK(x0 == doctest::Approx(1.3247179572447).epsilon(1e-10));
  const double f_star = cost.eval(diag3(1, 0, x0));
  CHECK(f_star == doctest::Approx(-1.9322578845).epsilon(1e-8));
  // grid scan of the quartic confirms the bisection minimum
  double best = 1e9;
  for (int i = -4000; i <= 4000; ++i) {
    const double x = i / 1000.0;
    best = std::min(best, -0.5 * (x + 1) * (x + 1) + 0.25 * x * x * x * x);
  }
  CHECK(f_star == doctest::Approx(best).epsilon(1e-5));
  // and the gradient vanishes there
  CHECK(cost.grad(diag3(1, 0, x0)).norm() < 1e-10);
}

TEST_CASE("cost depends only on the quadratic block and the corner entry") {
  const CostModel<double> cost = apocalypse_cost<double>();
  std::mt19937_64 rng(32);
  const Matrix base = testsupport::gaussian(3, 3, rng);
  Matrix tweaked = base;
  tweaked(0, 2) += 1.5;
  tweaked(1, 2) -= 2.0;
  tweaked(2, 0) += 0.3;
  tweaked(2, 1) -= 0.7;
  CHECK(cost.eval(base) == doctest::Approx(cost.eval(tweaked)).epsilon(1e-15));
}

TEST_CASE("linear cost has constant gradient and no curvature") {
  std::mt19937_64 rng(33);
  const Vector u = testsupport::gaussian_vector(4, rng);
  const Vector v = testsupport::gaussian_vector(5, rng);
  const CostModel<double> cost = linear_cost<double>(u, v);
  CHECK(cost.eval(Matrix::Zero(4, 5)) == 0.0);
  const Matrix x = testsupport::gaussian(4, 5, rng);
  CHECK((cost.grad(x) - u * v.transpose()).norm() == 0.0);
  CHECK(cost.hess_vec(x, testsupport::gaussian(4, 5, rng)).norm() == 0.0);
}

TEST_CASE("quadratic distance cost basics") {
  std::mt19937_64 rng(34);
  const Matrix x0 = testsupport::gaussian(3, 4, rng);
  const CostModel<double> cost = quadratic_distance_cost<double>(x0);
  CHECK(cost.eval(x0) == 0.0);
  CHECK(cost.grad(x0).norm() == 0.0);
  CHECK(*cost.lipschitz_grad == 1.0);
  const Matrix d = testsupport::gaussian(3, 4, rng);
  CHECK((cost.hess_vec(x0, d) - d).norm() == 0.0);
  // the all-zeros target specializes to half the squared norm
  const CostModel<double> half_norm = quadratic_distance_cost<double>(Matrix::Zero(3, 4));
  const Matrix x = testsupport::gaussian(3, 4, rng);
  CHECK(half_norm.eval(x) == doctest::Approx(0.5 * x.squaredNorm()));
  CHECK((half_norm.grad(x) - x).norm() == 0.0);
}

TEST_CASE("all built-in costs pass the finite-difference contract") {
  std::mt19937_64 rng(35);
  const CostModel<double> apoc = apocalypse_cost<double>();
  const CostModel<double> lin =
      linear_cost<double>(testsupport::gaussian_vector(3, rng), testsupport::gaussian_vector(3, rng));
  const CostModel<double> quad = quadratic_distance_cost<double>(testsupport::gaussian(3, 3, rng));
  for (const auto* cost : {&apoc, &lin, &quad}) {
    for (int i = 0; i < 3; ++i) {
      const Matrix x = testsupport::gaussian(3, 3, rng);
      CHECK(testsupport::max_gradient_fd_error(*cost, x, rng) < 1e-5);
      CHECK(testsupport::max_hvp_asymmetry(*cost, x, rng) < 1e-8);
    }
  }
}

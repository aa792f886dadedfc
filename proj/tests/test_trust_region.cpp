#include <doctest.h>

#include <cmath>
#include <random>

#include "apocalift/trust_region.hpp"
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

LrPoint<double> factor_pair_for(const Matrix& x, Index r) {
  const SvdFactors<double> f = deterministic_svd(x);
  const Vector root = f.sigma.head(r).array().sqrt().matrix();
  return {f.u.leftCols(r) * root.asDiagonal(), f.v.leftCols(r) * root.asDiagonal()};
}

LrPoint<double> limit_preimage() {
  Matrix l = Matrix::Zero(3, 2);
  l(0, 0) = 1.0;
  return {l, l};
}

double model_value(const Pullback<LrLift<double>>& problem, const TrIterate<LrLift<double>>& it,
                   const LrTangent<double>& s) {
  return it.g + problem.inner(s, it.grad) +
         0.5 * problem.inner(s, problem.hess_vec(it.y, s));
}

}  // namespace

TEST_CASE("gradient-branch cauchy step matches a fine grid search") {
  std::mt19937_64 rng(71);
  const LrLift<double> lift(4, 4, 2);
  const CostModel<double> cost = quadratic_distance_cost<double>(testsupport::gaussian(4, 4, rng));
  const Pullback<LrLift<double>> problem(lift, cost);
  for (int trial = 0; trial < 10; ++trial) {
    const LrPoint<double> y{testsupport::gaussian(4, 2, rng), testsupport::gaussian(4, 2, rng)};
    const auto it = evaluate_tr_iterate(problem, y, 1.0);
    if (it.step_type != TrStepType::k1) continue;
    const auto s = cauchy_step(problem, it);
    const double ours = model_value(problem, it, s);
    double best = it.g;
    const auto u = lift.scale(it.grad, -1.0);
    for (int g = 0; g <= 10000; ++g) {
      const double t = it.gamma * g / 10000.0;  // delta / |u| = gamma
      best = std::min(best, model_value(problem, it, lift.scale(u, t)));
    }
    CHECK(ours <= best + 1e-9 * std::max(1.0, std::abs(best)));
    CHECK(std::sqrt(problem.inner(s, s)) <= it.delta * (1 + 1e-12));
  }
}

TEST_CASE("eigenstep iterations take the full radius along negative curvature") {
  const CostModel<double> cost = apocalypse_cost<double>();
  const LrLift<double> lift(3, 3, 2);
  const Pullback<LrLift<double>> problem(lift, cost);
  const auto it = evaluate_tr_iterate(problem, limit_preimage(), 0.7);
  REQUIRE(it.step_type == TrStepType::k2);
  CHECK(it.grad_norm < 1e-14);
  CHECK(it.lambda_min == doctest::Approx(-1.0).epsilon(1e-10));
  CHECK(it.delta == doctest::Approx(0.7 * 1.0).epsilon(1e-10));
  const auto s = cauchy_step(problem, it);
  CHECK(std::sqrt(problem.inner(s, s)) == doctest::Approx(it.delta).epsilon(1e-12));
  // the model decreases at least by the eigenstep guarantee
  const double decrease = model_decrease(problem, it, s);
  CHECK(decrease >= 0.5 * it.gamma * it.gamma * std::pow(-it.lambda_min, 3.0) - 1e-12);
  // the eigenvector points into descent
  CHECK(problem.inner(s, it.grad) <= 1e-14);
}

TEST_CASE("gradient-branch decrease meets the cauchy guarantee") {
  std::mt19937_64 rng(72);
  const LrLift<double> lift(5, 4, 2);
  const CostModel<double> cost = quadratic_distance_cost<double>(testsupport::gaussian(5, 4, rng));
  const Pullback<LrLift<double>> problem(lift, cost);
  for (int trial = 0; trial < 20; ++trial) {
    const LrPoint<double> y{testsupport::gaussian(5, 2, rng), testsupport::gaussian(4, 2, rng)};
    const auto it = evaluate_tr_iterate(problem, y, 0.5);
    if (it.step_type != TrStepType::k1) continue;
    const auto s = cauchy_step(problem, it);
    const double decrease = model_decrease(problem, it, s);
    const double guarantee = 0.5 * std::min(1.0 / (1.0 + it.hess_op_norm), it.gamma) *
                             it.grad_norm * it.grad_norm;
    CHECK(decrease >= guarantee - 1e-10);
  }
}

TEST_CASE("a 2-critical iterate produces the zero step") {
  std::mt19937_64 rng(73);
  const Matrix target = testsupport::random_rank(4, 4, 2, rng);
  const LrLift<double> lift(4, 4, 2);
  const Pullback<LrLift<double>> problem(lift, quadratic_distance_cost<double>(target));
  const LrPoint<double> y = lift.rebalance(factor_pair_for(target, 2));
  const auto it = evaluate_tr_iterate(problem, y, 1.0);
  CHECK(it.grad_norm < 1e-12);
  CHECK(it.lambda_min >= -1e-10);
  const auto s = cauchy_step(problem, it);
  CHECK(problem.inner(s, s) < 1e-20);
  CHECK(model_decrease(problem, it, s) == doctest::Approx(0.0));
}

TEST_CASE("rho approaches one as the radius shrinks") {
  std::mt19937_64 rng(74);
  const LrLift<double> lift(4, 4, 2);
  const CostModel<double> cost = quadratic_distance_cost<double>(testsupport::gaussian(4, 4, rng));
  const Pullback<LrLift<double>> problem(lift, cost);
  const LrPoint<double> y =
      lift.rebalance({testsupport::gaussian(4, 2, rng), testsupport::gaussian(4, 2, rng)});
  const auto it = evaluate_tr_iterate(problem, y, 1e-5);
  const auto s = cauchy_step(problem, it);
  const double decrease = model_decrease(problem, it, s);
  REQUIRE(decrease > 0.0);
  const double rho = (it.g - problem.value(problem.retract(y, s))) / decrease;
  CHECK(std::abs(rho - 1.0) < 1e-3);
}

TEST_CASE("the hook leaves the pulled-back value unchanged on the lr lift") {
  std::mt19937_64 rng(75);
  const LrLift<double> lift(4, 4, 2);
  const CostModel<double> cost = quadratic_distance_cost<double>(testsupport::gaussian(4, 4, rng));
  const Pullback<LrLift<double>> problem(lift, cost);
  for (int i = 0; i < 10; ++i) {
    const LrPoint<double> y{testsupport::gaussian(4, 2, rng), testsupport::gaussian(4, 2, rng)};
    CHECK(problem.value(lift.rebalance(y)) ==
          doctest::Approx(problem.value(y)).epsilon(1e-10));
  }
}

TEST_CASE("escape run: trust region on the factor lift leaves the stall") {
  const CostModel<double> cost = apocalypse_cost<double>();
  const LrLift<double> lift(3, 3, 2);
  const Pullback<LrLift<double>> problem(lift, cost);
  TrConfig<double> cfg;
  cfg.max_iters = 500;
  const auto result = tr_run(problem, factor_pair_for(diag3(2, 1, 0), 2), cfg);
  CHECK(result.status == TrStatus::converged);
  CHECK(result.final_grad_norm <= 1e-6);
  CHECK(result.final_lambda_min >= -1e-6);
  const double f_final = problem.value(result.y);
  CHECK(f_final <= -1.9);
  // well below the stalled value -0.5, close to the oracle optimum
  const double x0 = testsupport::bisect([](double x) { return x * x * x - x - 1; }, 1.0, 2.0);
  const double f_star = cost.eval(diag3(1, 0, x0));
  CHECK(f_final <= f_star + 1e-6);
  CHECK(f_final >= f_star - 1e-6);

  // g never increases and gamma respects the run-measured floor
  const double gamma_min = tr_gamma_min(cfg, result.measured_l1, result.measured_l2);
  for (std::size_t i = 0; i < result.trace.size(); ++i) {
    if (i) CHECK(result.trace[i].f <= result.trace[i - 1].f + 1e-12);
    CHECK(result.trace[i].gamma >= gamma_min - 1e-15);
  }
  CHECK(max_consecutive_failures(result.trace) <=
        static_cast<Index>(std::ceil(std::log(gamma_min / cfg.gamma_hi) / std::log(cfg.gamma_c))));
}

TEST_CASE("iterates stay in the rebalanced sublevel set") {
  std::mt19937_64 rng(76);
  const Index m = 5, n = 4, r = 2;
  const LrLift<double> lift(m, n, r);
  const CostModel<double> cost = quadratic_distance_cost<double>(testsupport::gaussian(m, n, rng));
  const Pullback<LrLift<double>> problem(lift, cost);
  TrConfig<double> cfg;
  cfg.max_iters = 120;
  const LrPoint<double> y0{testsupport::gaussian(m, r, rng), testsupport::gaussian(n, r, rng)};
  const auto result = tr_run(problem, y0, cfg);
  const double f0 = problem.value(lift.rebalance(y0));
  // every recorded iterate is rebalanced: factor energy is twice the nuclear
  // norm, hence bounded via the image norm within the sublevel set
  const LrPoint<double> yf = result.y;
  const Matrix xf = lift.apply(yf);
  CHECK(problem.value(yf) <= f0 + 1e-12);
  CHECK(yf.l.squaredNorm() + yf.r.squaredNorm() <= 2 * std::sqrt(2.0) * xf.norm() + 1e-9);
}

TEST_CASE("unsuccessful iterations contract gamma") {
  std::mt19937_64 rng(77);
  bool saw_failure = false;
  for (int attempt = 0; attempt < 10 && !saw_failure; ++attempt) {
    const Index m = 5, n = 5, r = 2;
    const LrLift<double> lift(m, n, r);
    const CostModel<double> cost =
        quadratic_distance_cost<double>(Matrix(3.0 * testsupport::gaussian(m, n, rng)));
    const Pullback<LrLift<double>> problem(lift, cost);
    TrConfig<double> cfg;
    cfg.max_iters = 60;
    const LrPoint<double> y0{Matrix(2.0 * testsupport::gaussian(m, r, rng)),
                             Matrix(2.0 * testsupport::gaussian(n, r, rng))};
    const auto result = tr_run(problem, y0, cfg);
    for (std::size_t i = 0; i + 1 < result.trace.size(); ++i) {
      if (!result.trace[i].success) {
        saw_failure = true;
        CHECK(result.trace[i + 1].gamma ==
              doctest::Approx(cfg.gamma_c * result.trace[i].gamma).epsilon(1e-12));
        CHECK(result.trace[i + 1].f == doctest::Approx(result.trace[i].f));
      }
    }
  }
  CHECK(saw_failure);
}

TEST_CASE("truncated-cg refinement never loses to the cauchy step") {
  std::mt19937_64 rng(78);
  const Index m = 5, n = 4, r = 2;
  const LrLift<double> lift(m, n, r);
  const CostModel<double> cost = quadratic_distance_cost<double>(testsupport::gaussian(m, n, rng));
  const Pullback<LrLift<double>> problem(lift, cost);
  for (int i = 0; i < 10; ++i) {
    const LrPoint<double> y{testsupport::gaussian(m, r, rng), testsupport::gaussian(n, r, rng)};
    const auto it = evaluate_tr_iterate(problem, y, 0.8);
    const auto sc = cauchy_step(problem, it);
    const auto refined = detail::truncated_cg_step(problem, it);
    CHECK(std::sqrt(problem.inner(refined, refined)) <= it.delta * (1 + 1e-9));
    // the run uses whichever is better, so dominance holds by construction
    const double best = std::max(model_decrease(problem, it, sc),
                                 model_decrease(problem, it, refined));
    CHECK(best >= model_decrease(problem, it, sc) - 1e-15);
  }
  // and the full run accepts the flag
  TrConfig<double> cfg;
  cfg.use_tcg = true;
  cfg.max_iters = 200;
  const auto result =
      tr_run(problem, LrPoint<double>{testsupport::gaussian(m, r, rng),
                                      testsupport::gaussian(n, r, rng)},
             cfg);
  for (std::size_t i = 1; i < result.trace.size(); ++i)
    CHECK(result.trace[i].f <= result.trace[i - 1].f + 1e-12);
}

TEST_CASE("complexity bound arithmetic") {
  TrConfig<double> cfg;
  // infinite tolerances cost nothing
  CHECK(complexity_bound<double>(1.0, 0.0, 2.0, 3.0, cfg,
                                 std::numeric_limits<double>::infinity(),
                                 std::numeric_limits<double>::infinity()) == 0.0);
  // doubling the gap doubles the inner floor (up to flooring and rounding)
  const double b1 = complexity_bound<double>(1.0, 0.0, 2.0, 3.0, cfg, 1e-2, 1e-2);
  const double b2 = complexity_bound<double>(2.0, 0.0, 2.0, 3.0, cfg, 1e-2, 1e-2);
  CHECK(b2 == doctest::Approx(2 * b1).epsilon(1e-9));
  // monotone in the tolerances
  CHECK(complexity_bound<double>(1.0, 0.0, 2.0, 3.0, cfg, 1e-3, 1e-2) >= b1);
  CHECK_THROWS_AS(complexity_bound<double>(0.0, 1.0, 2.0, 3.0, cfg, 1e-2, 1e-2),
                  std::invalid_argument);
  CHECK_THROWS_AS(complexity_bound<double>(1.0, 0.0, 2.0, 3.0, cfg, 0.0, 1e-2),
                  std::invalid_argument);
  // zero constants drop their terms instead of dividing by zero
  CHECK(std::isfinite(tr_gamma_min<double>(cfg, 0.0, 0.0)));
  CHECK(tr_gamma_min<double>(cfg, 0.0, 0.0) == doctest::Approx(cfg.gamma_lo));
}

TEST_CASE("theory checks on random quadratic instances") {
  std::mt19937_64 rng(79);
  for (int trial = 0; trial < 6; ++trial) {
    const Index m = 4 + (trial % 3), n = 4 + (trial % 2), r = 1 + (trial % 3);
    const LrLift<double> lift(m, n, r);
    const CostModel<double> cost =
        quadratic_distance_cost<double>(testsupport::gaussian(m, n, rng));
    const Pullback<LrLift<double>> problem(lift, cost);
    TrConfig<double> cfg;
    cfg.max_iters = 2000;
    const LrPoint<double> y0{testsupport::gaussian(m, r, rng), testsupport::gaussian(n, r, rng)};
    const auto result = tr_run(problem, y0, cfg);
    CHECK(result.status == TrStatus::converged);
    REQUIRE(!result.trace.empty());
    const double gamma_min = tr_gamma_min(cfg, result.measured_l1, result.measured_l2);
    for (const auto& row : result.trace) CHECK(row.gamma >= gamma_min - 1e-15);
    CHECK(max_consecutive_failures(result.trace) <=
          static_cast<Index>(
              std::ceil(std::log(gamma_min / cfg.gamma_hi) / std::log(cfg.gamma_c))));
    const double bound =
        complexity_bound(result.trace.front().f, problem.value(result.y), result.measured_l1,
                         result.measured_l2, cfg, cfg.stop_eps1, cfg.stop_eps2);
    CHECK(static_cast<double>(count_tolerance_violations(result.trace, cfg.stop_eps1,
                                                         cfg.stop_eps2)) <= bound);
  }
}

TEST_CASE("config validation rejects bad ranges") {
  TrConfig<double> cfg;
  cfg.gamma_c = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrConfig<double>{};
  cfg.gamma_lo = 0.5;
  cfg.gamma_hi = 0.1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrConfig<double>{};
  cfg.gamma0 = 100.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

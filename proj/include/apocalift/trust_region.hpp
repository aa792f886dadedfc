#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "apocalift/bounded_rank.hpp"
#include "apocalift/lifts.hpp"
#include "apocalift/types.hpp"

namespace apocalift {

/// Trust-region method on a lift with a hook applied to every accepted
/// iterate. The radius is delta = gamma * |grad g| on gradient steps and
/// gamma * |lambda_-| on eigensteps; failures contract gamma by gamma_c,
/// successes reset it into [gamma_lo, gamma_hi].
template <typename Scalar>
struct TrConfig {
  Scalar gamma_c = Scalar(0.5);
  Scalar eta = Scalar(0.1);
  Scalar gamma_lo = Scalar(1e-6);
  Scalar gamma_hi = Scalar(10);
  Scalar gamma0 = Scalar(1);
  Index max_iters = 500;
  Scalar stop_eps1 = Scalar(1e-6);
  Scalar stop_eps2 = Scalar(1e-6);
  bool use_tcg = false;  // refine the Cauchy step with truncated CG
  Scalar rank_tol = Scalar(kDefaultRankTol);

  void validate() const {
    if (!(gamma_c > Scalar(0) && gamma_c < Scalar(1)))
      throw std::invalid_argument("TrConfig: gamma_c must lie in (0,1)");
    if (!(eta > Scalar(0) && eta < Scalar(1)))
      throw std::invalid_argument("TrConfig: eta must lie in (0,1)");
    if (!(gamma_lo > Scalar(0) && gamma_lo <= gamma_hi))
      throw std::invalid_argument("TrConfig: need 0 < gamma_lo <= gamma_hi");
    if (!(gamma0 >= gamma_lo && gamma0 <= gamma_hi))
      throw std::invalid_argument("TrConfig: gamma0 must lie in [gamma_lo, gamma_hi]");
    if (max_iters <= 0) throw std::invalid_argument("TrConfig: max_iters must be positive");
    if (stop_eps1 < Scalar(0) || stop_eps2 < Scalar(0))
      throw std::invalid_argument("TrConfig: stopping tolerances must be >= 0");
  }
};

enum class TrStepType { k1, k2 };

/// Fully evaluated iterate: gradient, dense tangent-space Hessian with its
/// leftmost eigenpair, and the resulting radius. The eigenvector sign makes
/// <e, grad> <= 0. The step type is k2 exactly when lambda < 0 and
/// |grad|^2 < |lambda_-|^3.
template <typename Lift>
struct TrIterate {
  using Scalar = typename Lift::ScalarType;
  typename Lift::Point y;
  Scalar g;
  typename Lift::Tangent grad;
  Scalar grad_norm;
  MatrixX<Scalar> hess;
  Scalar lambda_min;
  Scalar hess_op_norm;
  typename Lift::Tangent eigvec;
  TrStepType step_type;
  Scalar gamma;
  Scalar delta;
};

template <typename Lift>
TrIterate<Lift> evaluate_tr_iterate(const Pullback<Lift>& problem,
                                    const typename Lift::Point& y,
                                    typename Lift::ScalarType gamma) {
  using Scalar = typename Lift::ScalarType;
  TrIterate<Lift> it;
  it.y = y;
  it.g = problem.value(y);
  it.grad = problem.gradient(y);
  it.grad_norm = std::sqrt(problem.inner(it.grad, it.grad));
  it.hess = problem.dense_hessian(y);
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(it.hess);
  it.lambda_min = eig.eigenvalues()(0);
  it.hess_op_norm =
      std::max(std::abs(eig.eigenvalues()(0)), std::abs(eig.eigenvalues()(eig.eigenvalues().size() - 1)));
  VectorX<Scalar> e = eig.eigenvectors().col(0);
  Index arg = 0;
  e.cwiseAbs().maxCoeff(&arg);
  if (e(arg) < Scalar(0)) e = -e;
  it.eigvec = problem.lift().from_coords(y, e);
  if (problem.inner(it.eigvec, it.grad) > Scalar(0)) it.eigvec = problem.lift().scale(it.eigvec, Scalar(-1));
  const Scalar lambda_neg = std::min(it.lambda_min, Scalar(0));
  const bool k2 = it.lambda_min < Scalar(0) &&
                  it.grad_norm * it.grad_norm < -lambda_neg * lambda_neg * lambda_neg;
  it.step_type = k2 ? TrStepType::k2 : TrStepType::k1;
  it.gamma = gamma;
  it.delta = k2 ? gamma * (-lambda_neg) : gamma * it.grad_norm;
  return it;
}

/// Exact minimizer of the quadratic model along the step direction (negative
/// gradient on k1 iterations, leftmost eigenvector on k2 iterations),
/// restricted to the radius. delta = 0 yields the zero step.
template <typename Lift>
typename Lift::Tangent cauchy_step(const Pullback<Lift>& problem, const TrIterate<Lift>& it) {
  using Scalar = typename Lift::ScalarType;
  if (it.delta == Scalar(0)) return problem.lift().zero_tangent(it.y);
  if (it.step_type == TrStepType::k2) {
    // concave along the eigenvector, so the boundary is optimal
    return problem.lift().scale(it.eigvec, it.delta);
  }
  const typename Lift::Tangent u = problem.lift().scale(it.grad, Scalar(-1));
  const Scalar c2 = problem.inner(u, problem.hess_vec(it.y, u));
  const Scalar t_max = it.gamma;  // delta / |u|
  Scalar t = t_max;
  if (c2 > Scalar(0)) t = std::min(it.grad_norm * it.grad_norm / c2, t_max);
  return problem.lift().scale(u, t);
}

template <typename Lift>
typename Lift::ScalarType model_decrease(const Pullback<Lift>& problem, const TrIterate<Lift>& it,
                                         const typename Lift::Tangent& s) {
  using Scalar = typename Lift::ScalarType;
  return -(problem.inner(s, it.grad) +
           Scalar(0.5) * problem.inner(s, problem.hess_vec(it.y, s)));
}

namespace detail {

// Steihaug-style refinement. The result is only used when it beats the
// Cauchy step in model value, preserving the dominance the theory needs.
template <typename Lift>
typename Lift::Tangent truncated_cg_step(const Pullback<Lift>& problem,
                                         const TrIterate<Lift>& it) {
  using Scalar = typename Lift::ScalarType;
  using Tangent = typename Lift::Tangent;
  const auto& lift = problem.lift();
  Tangent s = lift.zero_tangent(it.y);
  Tangent res = it.grad;  // gradient of the model at s
  Scalar rr = problem.inner(res, res);
  const Scalar stop = std::min(Scalar(0.1), std::sqrt(it.grad_norm)) * it.grad_norm;
  Tangent p = lift.scale(res, Scalar(-1));
  Scalar s_norm2 = Scalar(0);
  const Index max_cg = 2 * lift.tangent_dim();
  const auto to_boundary = [&](const Tangent& base, Scalar base_norm2, const Tangent& dir,
                               Scalar dir_norm2, Scalar base_dot_dir) {
    const Scalar disc =
        base_dot_dir * base_dot_dir + dir_norm2 * (it.delta * it.delta - base_norm2);
    const Scalar t = (-base_dot_dir + std::sqrt(std::max(Scalar(0), disc))) / dir_norm2;
    return lift.add_scaled(base, dir, t);
  };
  for (Index i = 0; i < max_cg && std::sqrt(rr) > stop; ++i) {
    const Tangent hp = problem.hess_vec(it.y, p);
    const Scalar php = problem.inner(p, hp);
    const Scalar sp = problem.inner(s, p);
    const Scalar pp = problem.inner(p, p);
    if (pp == Scalar(0)) break;
    if (php <= Scalar(0)) return to_boundary(s, s_norm2, p, pp, sp);
    const Scalar alpha = rr / php;
    const Scalar new_norm2 = s_norm2 + 2 * alpha * sp + alpha * alpha * pp;
    if (new_norm2 >= it.delta * it.delta) return to_boundary(s, s_norm2, p, pp, sp);
    s = lift.add_scaled(s, p, alpha);
    s_norm2 = new_norm2;
    res = lift.add_scaled(res, hp, alpha);
    const Scalar rr_new = problem.inner(res, res);
    p = lift.add_scaled(lift.scale(res, Scalar(-1)), p, rr_new / rr);
    rr = rr_new;
  }
  return s;
}

}  // namespace detail

template <typename Scalar>
struct TrTraceRow {
  Index iter;
  Scalar f;
  Scalar grad_norm;
  Scalar lambda_min;
  Scalar delta;
  Scalar rho;
  Scalar gamma;
  TrStepType step_type;
  bool success;
  Scalar mu1;      // stationarity measure of the image on the variety
  Scalar sigma_r;  // r-th singular value of the image
};

enum class TrStatus { converged, max_iters };

template <typename Lift>
struct TrResult {
  using Scalar = typename Lift::ScalarType;
  typename Lift::Point y;
  std::vector<TrTraceRow<Scalar>> trace;
  TrStatus status;
  Scalar final_grad_norm;
  Scalar final_lambda_min;
  // Run-measured surrogates for the regularity constants: the largest
  // pullback-Hessian operator norm / first-order residual ratio, and the
  // largest third-order residual ratio.
  Scalar measured_l1;
  Scalar measured_l2;
};

/// Runs the hooked trust-region loop from Phi(y0) until the iterate is
/// (stop_eps1, stop_eps2)-approximately 2-critical or max_iters is reached.
/// Every accepted point passes through the lift's rebalancing map.
template <typename Lift>
TrResult<Lift> tr_run(const Pullback<Lift>& problem, const typename Lift::Point& y0,
                      const TrConfig<typename Lift::ScalarType>& cfg) {
  using Scalar = typename Lift::ScalarType;
  using Tangent = typename Lift::Tangent;
  cfg.validate();
  const auto& lift = problem.lift();
  TrResult<Lift> result;
  result.y = lift.rebalance(y0);
  result.status = TrStatus::max_iters;
  result.measured_l1 = Scalar(0);
  result.measured_l2 = Scalar(0);
  Scalar gamma = cfg.gamma0;

  for (Index k = 0; k < cfg.max_iters; ++k) {
    const TrIterate<Lift> it = evaluate_tr_iterate(problem, result.y, gamma);
    result.final_grad_norm = it.grad_norm;
    result.final_lambda_min = it.lambda_min;
    if (it.grad_norm <= cfg.stop_eps1 && it.lambda_min >= -cfg.stop_eps2) {
      result.status = TrStatus::converged;
      return result;
    }
    result.measured_l1 = std::max(result.measured_l1, it.hess_op_norm);

    Tangent s = cauchy_step(problem, it);
    Scalar decrease = model_decrease(problem, it, s);
    if (cfg.use_tcg) {
      const Tangent refined = detail::truncated_cg_step(problem, it);
      const Scalar refined_decrease = model_decrease(problem, it, refined);
      if (refined_decrease > decrease) {
        s = refined;
        decrease = refined_decrease;
      }
    }
    if (decrease <= Scalar(0)) {  // zero model decrease means 2-critical
      result.status = TrStatus::converged;
      return result;
    }

    const typename Lift::Point y_trial = problem.retract(result.y, s);
    const Scalar g_trial = problem.value(y_trial);
    const Scalar rho = (it.g - g_trial) / decrease;

    const Scalar s_norm = std::sqrt(problem.inner(s, s));
    if (s_norm > Scalar(0)) {
      const Scalar lin_res = std::abs(g_trial - it.g - problem.inner(s, it.grad));
      const Scalar quad_res = std::abs(g_trial - (it.g - decrease));
      result.measured_l1 = std::max(result.measured_l1, 2 * lin_res / (s_norm * s_norm));
      result.measured_l2 = std::max(result.measured_l2, 6 * quad_res / (s_norm * s_norm * s_norm));
    }

    const bool success = rho >= cfg.eta;
    const StationarityReport<Scalar> rep =
        stationarity_report(problem.lift().apply(result.y), lift.rank_bound(), problem.cost(),
                            cfg.rank_tol);
    result.trace.push_back({k, it.g, it.grad_norm, it.lambda_min, it.delta, rho, gamma,
                            it.step_type, success, rep.mu1, rep.sigma_r});
    if (success) {
      result.y = lift.rebalance(y_trial);
      gamma = std::clamp(gamma / cfg.gamma_c, cfg.gamma_lo, cfg.gamma_hi);
    } else {
      gamma = cfg.gamma_c * gamma;
    }
  }
  const TrIterate<Lift> last = evaluate_tr_iterate(problem, result.y, gamma);
  result.final_grad_norm = last.grad_norm;
  result.final_lambda_min = last.lambda_min;
  if (last.grad_norm <= cfg.stop_eps1 && last.lambda_min >= -cfg.stop_eps2)
    result.status = TrStatus::converged;
  return result;
}

/// Longest streak of rejected iterations in a trace.
template <typename Scalar>
Index max_consecutive_failures(const std::vector<TrTraceRow<Scalar>>& trace) {
  Index best = 0, current = 0;
  for (const auto& row : trace) {
    current = row.success ? 0 : current + 1;
    best = std::max(best, current);
  }
  return best;
}

/// Number of iterations violating either tolerance.
template <typename Scalar>
Index count_tolerance_violations(const std::vector<TrTraceRow<Scalar>>& trace, Scalar eps1,
                                 Scalar eps2) {
  Index count = 0;
  for (const auto& row : trace) {
    const Scalar lambda_neg = std::min(row.lambda_min, Scalar(0));
    if (row.grad_norm > eps1 || -lambda_neg > eps2) ++count;
  }
  return count;
}

template <typename Scalar>
Scalar tr_gamma_min(const TrConfig<Scalar>& cfg, Scalar l1, Scalar l2) {
  if (l1 < Scalar(0) || l2 < Scalar(0))
    throw std::invalid_argument("tr_gamma_min: constants must be >= 0");
  Scalar g = std::min(cfg.gamma_lo, cfg.gamma_c / (Scalar(1) + l1));
  if (l1 > Scalar(0)) g = std::min(g, cfg.gamma_c * (Scalar(1) - cfg.eta) / (Scalar(2) * l1));
  if (l2 > Scalar(0)) g = std::min(g, Scalar(3) * cfg.gamma_c * (Scalar(1) - cfg.eta) / l2);
  return g;
}

/// Worst-case count of iterations at which either tolerance is violated,
/// given regularity constants for the pullbacks along the run. Returned as a
/// floating-point count: at tight tolerances the value overflows any integer
/// type long before it stops being a valid bound.
template <typename Scalar>
Scalar complexity_bound(Scalar g0, Scalar gmin, Scalar l1, Scalar l2, const TrConfig<Scalar>& cfg,
                        Scalar eps1, Scalar eps2) {
  cfg.validate();
  if (gmin > g0) throw std::invalid_argument("complexity_bound: gmin must not exceed g0");
  if (!(eps1 > Scalar(0)) || !(eps2 > Scalar(0)))
    throw std::invalid_argument("complexity_bound: tolerances must be positive");
  const Scalar gamma_min = tr_gamma_min(cfg, l1, l2);
  const Scalar kappa_min = Scalar(0.5) * cfg.eta * gamma_min * gamma_min;
  const Scalar streak =
      std::ceil(std::log(gamma_min / cfg.gamma_hi) / std::log(cfg.gamma_c) + Scalar(1));
  const Scalar worst = std::max(Scalar(1) / (eps1 * eps1), Scalar(1) / (eps2 * eps2 * eps2));
  return streak * std::floor((g0 - gmin) / kappa_min * worst);
}

}  // namespace apocalift


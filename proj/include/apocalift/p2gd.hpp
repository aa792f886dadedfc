#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "apocalift/bounded_rank.hpp"
#include "apocalift/costs.hpp"
#include "apocalift/svd.hpp"
#include "apocalift/types.hpp"

namespace apocalift {

/// Projected-projected gradient descent: project the negative gradient onto
/// the tangent cone, move, then retract onto the variety by truncated SVD,
/// with Armijo backtracking on the sufficient-decrease condition
///   f(X) - f(X+) >= tau * alpha * |Proj_{T_X}(-grad f(X))|^2.
/// Backtracking restarts from alpha_init every iteration.
template <typename Scalar>
struct P2gdConfig {
  Scalar tau = Scalar(0.2);
  Scalar alpha_init = Scalar(1);
  Scalar backtrack_factor = Scalar(0.5);
  Index max_iters = 100;
  Scalar stop_mu1 = Scalar(0);  // 0 disables the stationarity stop
  Index max_backtracks = 50;
  Scalar rank_tol = Scalar(kDefaultRankTol);

  void validate() const {
    if (!(tau > Scalar(0) && tau < Scalar(1)))
      throw std::invalid_argument("P2gdConfig: tau must lie in (0,1)");
    if (!(alpha_init > Scalar(0)))
      throw std::invalid_argument("P2gdConfig: alpha_init must be positive");
    if (!(backtrack_factor > Scalar(0) && backtrack_factor < Scalar(1)))
      throw std::invalid_argument("P2gdConfig: backtrack_factor must lie in (0,1)");
    if (max_iters <= 0) throw std::invalid_argument("P2gdConfig: max_iters must be positive");
    if (stop_mu1 < Scalar(0)) throw std::invalid_argument("P2gdConfig: stop_mu1 must be >= 0");
    if (max_backtracks <= 0)
      throw std::invalid_argument("P2gdConfig: max_backtracks must be positive");
  }
};

template <typename Scalar>
struct P2gdStep {
  MatrixX<Scalar> x_next;
  Scalar alpha;
  bool accepted;
  Index backtracks;
  Scalar f_before;
  Scalar f_after;
  Scalar mu1;
  Scalar sigma_r;
};

template <typename Scalar>
P2gdStep<Scalar> p2gd_step(const MatrixX<Scalar>& x, Index r, const CostModel<Scalar>& cost,
                           const P2gdConfig<Scalar>& cfg) {
  cfg.validate();
  const TangentConeData<Scalar> t = tangent_cone_at(x, r, cfg.rank_tol);
  const TangentProjection<Scalar> proj = project_tangent_cone(t, MatrixX<Scalar>(-cost.grad(x)));
  P2gdStep<Scalar> step;
  step.f_before = cost.eval(x);
  step.mu1 = proj.norm;
  step.sigma_r = t.sigma_r();
  if (proj.norm == Scalar(0)) {  // stationary: the zero step trivially decreases
    step.x_next = x;
    step.alpha = cfg.alpha_init;
    step.accepted = true;
    step.backtracks = 0;
    step.f_after = step.f_before;
    return step;
  }
  Scalar alpha = cfg.alpha_init;
  for (Index bt = 0; bt <= cfg.max_backtracks; ++bt) {
    const MatrixX<Scalar> candidate = truncated_svd_projection(x + alpha * proj.point, r);
    const Scalar f_cand = cost.eval(candidate);
    if (step.f_before - f_cand >= cfg.tau * alpha * proj.norm * proj.norm) {
      step.x_next = candidate;
      step.alpha = alpha;
      step.accepted = true;
      step.backtracks = bt;
      step.f_after = f_cand;
      return step;
    }
    alpha *= cfg.backtrack_factor;
  }
  step.x_next = x;
  step.alpha = alpha;
  step.accepted = false;
  step.backtracks = cfg.max_backtracks;
  step.f_after = step.f_before;
  return step;
}

enum class P2gdStatus { reached_stop_mu1, max_iters, line_search_failed };

template <typename Scalar>
struct P2gdTraceRow {
  Index iter;
  Scalar f;
  Scalar mu1;
  Scalar sigma_r;
  Scalar alpha;
  bool accepted;
};

template <typename Scalar>
struct P2gdResult {
  std::vector<P2gdTraceRow<Scalar>> trace;
  MatrixX<Scalar> x;
  P2gdStatus status;
};

/// Runs p2gd_step until the stationarity stop fires, max_iters is reached, or
/// the line search fails (the current point is then returned unchanged). The
/// observer, when set, sees every iterate including the initial one.
template <typename Scalar>
P2gdResult<Scalar> p2gd_run(
    const MatrixX<Scalar>& x0, Index r, const CostModel<Scalar>& cost,
    const P2gdConfig<Scalar>& cfg,
    const std::function<void(Index, const MatrixX<Scalar>&)>& observer = {}) {
  cfg.validate();
  P2gdResult<Scalar> result;
  result.x = x0;
  result.status = P2gdStatus::max_iters;
  if (observer) observer(0, result.x);
  for (Index k = 0; k < cfg.max_iters; ++k) {
    const P2gdStep<Scalar> step = p2gd_step(result.x, r, cost, cfg);
    result.trace.push_back({k, step.f_before, step.mu1, step.sigma_r, step.alpha, step.accepted});
    if (cfg.stop_mu1 > Scalar(0) && step.mu1 <= cfg.stop_mu1) {
      result.status = P2gdStatus::reached_stop_mu1;
      return result;
    }
    if (!step.accepted) {
      result.status = P2gdStatus::line_search_failed;
      return result;
    }
    result.x = step.x_next;
    if (observer) observer(k + 1, result.x);
  }
  return result;
}

}  // namespace apocalift

#include "apocalift/harness.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <stdexcept>

#include "apocalift/bounded_rank.hpp"
#include "apocalift/costs.hpp"
#include "apocalift/io.hpp"
#include "apocalift/lifts.hpp"

namespace apocalift::harness {

namespace {

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using nlohmann::ordered_json;

Matrix gaussian(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

Matrix orthonormal_columns(Index rows, Index cols, std::mt19937_64& rng) {
  const Matrix g = gaussian(rows, cols, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  return Matrix(qr.householderQ() * Matrix::Identity(rows, cols));
}

Vector unit_orthogonal_to(const Matrix& basis, std::mt19937_64& rng) {
  for (int attempt = 0; attempt < 32; ++attempt) {
    Vector v = gaussian(basis.rows(), 1, rng);
    v -= basis * (basis.transpose() * v);
    const double norm = v.norm();
    if (norm > 1e-8) return v / norm;
  }
  throw std::runtime_error("failed to sample a vector orthogonal to the given basis");
}

ordered_json null_row(Index iter, double f, double mu1, double sigma_r) {
  ordered_json j;
  j["iter"] = iter;
  j["f"] = f;
  j["mu1"] = mu1;
  j["sigma_r"] = sigma_r;
  j["grad_norm_lift"] = nullptr;
  j["lambda_min"] = nullptr;
  j["delta"] = nullptr;
  j["rho"] = nullptr;
  j["gamma"] = nullptr;
  j["step_type"] = nullptr;
  j["success"] = nullptr;
  return j;
}

const char* behavior_name(LimitBehavior b) {
  switch (b) {
    case LimitBehavior::apocalypse_like: return "apocalypse_like";
    case LimitBehavior::serendipity_like: return "serendipity_like";
    default: return "regular";
  }
}

const char* p2gd_status_name(P2gdStatus s) {
  switch (s) {
    case P2gdStatus::reached_stop_mu1: return "reached_stop_mu1";
    case P2gdStatus::max_iters: return "max_iters";
    default: return "line_search_failed";
  }
}

struct TraceWriter {
  std::vector<ordered_json> rows;

  void add(const P2gdTraceRow<double>& r) { rows.push_back(trace_row_json(r)); }
  void add(const TrTraceRow<double>& r) { rows.push_back(trace_row_json(r)); }
  void add(ordered_json j) { rows.push_back(std::move(j)); }

  void write(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::invalid_argument("cannot open trace output: " + path);
    for (const auto& row : rows) os << row.dump() << '\n';
  }
};

ordered_json summarize_p2gd(const P2gdResult<double>& result) {
  ordered_json s;
  s["iterations"] = result.trace.size();
  s["status"] = p2gd_status_name(result.status);
  if (!result.trace.empty()) {
    const auto& last = result.trace.back();
    s["final_f"] = last.f;
    s["final_mu1"] = last.mu1;
    s["final_sigma_r"] = last.sigma_r;
  }
  return s;
}

template <typename Lift>
ordered_json summarize_tr(const Pullback<Lift>& problem, const TrResult<Lift>& result,
                          const TrConfig<double>& cfg, double rank_tol) {
  ordered_json s;
  s["iterations"] = result.trace.size();
  s["status"] = result.status == TrStatus::converged ? "converged" : "max_iters";
  const Matrix x = problem.lift().apply(result.y);
  const StationarityReport<double> rep =
      stationarity_report(x, problem.lift().rank_bound(), problem.cost(), rank_tol);
  s["final_f"] = problem.cost().eval(x);
  s["final_mu1"] = rep.mu1;
  s["final_sigma_r"] = rep.sigma_r;
  s["final_grad_norm_lift"] = result.final_grad_norm;
  s["final_lambda_min"] = result.final_lambda_min;
  s["measured_l1"] = result.measured_l1;
  s["measured_l2"] = result.measured_l2;
  s["gamma_min"] = tr_gamma_min(cfg, result.measured_l1, result.measured_l2);
  s["max_consecutive_failures"] = max_consecutive_failures(result.trace);
  return s;
}

LrPoint<double> lr_start_for(const Matrix& x0, Index r) {
  // Any factorization works: the initial hook rebalances it.
  const SvdFactors<double> f = deterministic_svd(x0);
  const Vector root = f.sigma.head(r).array().sqrt().matrix();
  return {f.u.leftCols(r) * root.asDiagonal(), f.v.leftCols(r) * root.asDiagonal()};
}

int run_apocalypse(const ExperimentConfig& cfg, TraceWriter& trace, ordered_json& summary) {
  const double rank_tol = rank_tol_from_env();
  const CostModel<double> cost = apocalypse_cost<double>();
  Matrix x0 = Matrix::Zero(3, 3);
  x0.diagonal() << 2, 1, 0;
  Matrix limit = Matrix::Zero(3, 3);
  limit(0, 0) = 1;

  if (cfg.solver == "p2gd") {
    P2gdConfig<double> pc = cfg.p2gd;
    pc.rank_tol = rank_tol;
    std::vector<Matrix> iterates;
    const P2gdResult<double> result = p2gd_run<double>(
        x0, 2, cost, pc, [&](Index, const Matrix& x) { iterates.push_back(x); });
    for (const auto& row : result.trace) trace.add(row);
    summary = summarize_p2gd(result);
    const LimitClassification<double> cls =
        classify_limit_behavior(iterates, limit, Index(2), cost, cfg.classify_eps, rank_tol);
    summary["limit_mu1"] = cls.limit_mu1;
    summary["limit_f"] = cost.eval(limit);
    summary["classification"] = behavior_name(cls.behavior);
    return 0;
  }

  TrConfig<double> tc = cfg.tr;
  tc.rank_tol = rank_tol;
  if (cfg.lift == "stiefel") {
    const StiefelLift<double> lift(3, 3, 2);
    const SvdFactors<double> f = deterministic_svd(x0);
    const StiefelPoint<double> y0{f.u.leftCols(2),
                                  Matrix(f.v.leftCols(2) * f.sigma.head(2).asDiagonal())};
    const Pullback<StiefelLift<double>> problem(lift, cost);
    const TrResult<StiefelLift<double>> result = tr_run(problem, y0, tc);
    for (const auto& row : result.trace) trace.add(row);
    summary = summarize_tr(problem, result, tc, rank_tol);
    return 0;
  }
  const LrLift<double> lift(3, 3, 2);
  const Pullback<LrLift<double>> problem(lift, cost);
  const TrResult<LrLift<double>> result = tr_run(problem, lr_start_for(x0, 2), tc);
  for (const auto& row : result.trace) trace.add(row);
  summary = summarize_tr(problem, result, tc, rank_tol);
  const StationarityBounds<double> bounds = certify_stationarity<double>(
      result.y, cost, result.final_grad_norm, std::max(0.0, -result.final_lambda_min), rank_tol);
  summary["bound_op"] = bounds.bound_op;
  summary["bound_proj"] = bounds.bound_proj;
  return 0;
}

int run_linear(const ExperimentConfig& cfg, TraceWriter& trace, ordered_json& summary) {
  const double rank_tol = rank_tol_from_env();
  if (cfg.r >= std::min(cfg.m, cfg.n))
    throw std::invalid_argument("linear: needs r < min(m, n)");
  if (cfg.r < 2) throw std::invalid_argument("linear: needs r >= 2 for a rank-deficient limit");
  std::mt19937_64 rng(cfg.seed);
  const Index s = cfg.r - 1;
  const Matrix u_basis = orthonormal_columns(cfg.m, cfg.r, rng);
  const Matrix v_basis = orthonormal_columns(cfg.n, cfg.r, rng);
  Vector sigma = Vector::Zero(cfg.r);
  for (Index i = 0; i < s; ++i) sigma(i) = 2.0 - i * (1.0 / std::max<Index>(1, s));
  const Vector u = unit_orthogonal_to(u_basis, rng);
  const Vector v = unit_orthogonal_to(v_basis, rng);
  const CostModel<double> cost = linear_cost<double>(u, v);

  std::vector<Matrix> sequence;
  for (Index k = 1; k <= cfg.sequence_len; ++k) {
    Vector sk = sigma;
    for (Index i = s; i < cfg.r; ++i) sk(i) = 1.0 / static_cast<double>(k);
    sequence.push_back(u_basis * sk.asDiagonal() * v_basis.transpose());
  }
  const Matrix limit = u_basis * sigma.asDiagonal() * v_basis.transpose();

  const LimitClassification<double> cls =
      classify_limit_behavior(sequence, limit, cfg.r, cost, cfg.classify_eps, rank_tol);
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    const StationarityReport<double> rep = stationarity_report(sequence[i], cfg.r, cost, rank_tol);
    trace.add(null_row(static_cast<Index>(i), cost.eval(sequence[i]), rep.mu1, rep.sigma_r));
  }
  summary["classification"] = behavior_name(cls.behavior);
  summary["limit_mu1"] = cls.limit_mu1;
  summary["limit_f"] = cost.eval(limit);
  summary["sequence_final_mu1"] = cls.sequence_mu1.back();
  return 0;
}

int run_quadratic(const ExperimentConfig& cfg, TraceWriter& trace, ordered_json& summary) {
  const double rank_tol = rank_tol_from_env();
  std::mt19937_64 rng(cfg.seed);
  const Matrix target = gaussian(cfg.m, cfg.n, rng);
  const CostModel<double> cost = quadratic_distance_cost<double>(target);

  if (cfg.solver == "p2gd") {
    P2gdConfig<double> pc = cfg.p2gd;
    pc.rank_tol = rank_tol;
    const Matrix x0 = truncated_svd_projection(gaussian(cfg.m, cfg.n, rng), cfg.r);
    const P2gdResult<double> result = p2gd_run<double>(x0, cfg.r, cost, pc);
    for (const auto& row : result.trace) trace.add(row);
    summary = summarize_p2gd(result);
    return 0;
  }

  TrConfig<double> tc = cfg.tr;
  tc.rank_tol = rank_tol;
  if (cfg.lift == "stiefel") {
    const StiefelLift<double> lift(cfg.m, cfg.n, cfg.r);
    const StiefelPoint<double> y0{orthonormal_columns(cfg.m, cfg.r, rng),
                                  gaussian(cfg.n, cfg.r, rng)};
    const Pullback<StiefelLift<double>> problem(lift, cost);
    const TrResult<StiefelLift<double>> result = tr_run(problem, y0, tc);
    for (const auto& row : result.trace) trace.add(row);
    summary = summarize_tr(problem, result, tc, rank_tol);
    return 0;
  }
  const LrLift<double> lift(cfg.m, cfg.n, cfg.r);
  const LrPoint<double> y0{gaussian(cfg.m, cfg.r, rng), gaussian(cfg.n, cfg.r, rng)};
  const Pullback<LrLift<double>> problem(lift, cost);
  const TrResult<LrLift<double>> result = tr_run(problem, y0, tc);
  for (const auto& row : result.trace) trace.add(row);
  summary = summarize_tr(problem, result, tc, rank_tol);
  const StationarityBounds<double> bounds = certify_stationarity<double>(
      result.y, cost, result.final_grad_norm, std::max(0.0, -result.final_lambda_min), rank_tol);
  summary["bound_op"] = bounds.bound_op;
  summary["bound_proj"] = bounds.bound_proj;
  return 0;
}

int run_appendix_e(const ExperimentConfig& cfg, TraceWriter&, ordered_json& summary) {
  const double rank_tol = rank_tol_from_env();
  const double eps = cfg.epsilon;
  if (!(eps > 0)) throw std::invalid_argument("appendix_e: epsilon must be positive");
  const double e13 = std::cbrt(eps);
  const double e23 = e13 * e13;

  Matrix l = Matrix::Zero(cfg.m, cfg.r);
  Matrix r = Matrix::Zero(cfg.n, cfg.r);
  l(0, 0) = e13;
  r(0, 0) = e13;
  const LrPoint<double> y{l, r};
  const Matrix x = l * r.transpose();
  const CostModel<double> cost = quadratic_distance_cost<double>(Matrix::Zero(cfg.m, cfg.n));

  const LrLift<double> lift(cfg.m, cfg.n, cfg.r);
  const Pullback<LrLift<double>> problem(lift, cost);
  const auto grad = lift.gradient(y, cost);
  const double eps1 = std::sqrt(lift.inner(grad, grad));
  Eigen::SelfAdjointEigenSolver<Matrix> eig(problem.dense_hessian(y));
  const double lambda_min = eig.eigenvalues()(0);
  const double eps2 = std::max(0.0, -lambda_min);

  const StationarityBounds<double> bounds =
      certify_stationarity<double>(y, cost, eps1, eps2, rank_tol);
  const StationarityReport<double> rep = stationarity_report(x, cfg.r, cost, rank_tol);
  const double op_norm = deterministic_svd(x).sigma(0);

  summary["epsilon"] = eps;
  summary["grad_norm_lift"] = eps1;
  summary["lambda_min"] = lambda_min;
  summary["op_norm"] = op_norm;
  summary["mu1"] = rep.mu1;
  summary["bound_op"] = bounds.bound_op;
  summary["bound_proj"] = bounds.bound_proj;
  summary["ratio_op"] = bounds.bound_op / op_norm;
  summary["ratio_proj"] = bounds.bound_proj / rep.mu1;
  summary["expected_scale"] = e23;
  return 0;
}

}  // namespace

double rank_tol_from_env() {
  if (const char* env = std::getenv("APOCALIFT_RANK_TOL")) {
    try {
      const double v = parse_double(env);
      if (v > 0 && v < 1) return v;
    } catch (const std::exception&) {
    }
    throw std::invalid_argument("APOCALIFT_RANK_TOL must be a number in (0,1)");
  }
  return kDefaultRankTol;
}

nlohmann::ordered_json trace_row_json(const P2gdTraceRow<double>& row) {
  ordered_json j;
  j["iter"] = row.iter;
  j["f"] = row.f;
  j["mu1"] = row.mu1;
  j["sigma_r"] = row.sigma_r;
  j["grad_norm_lift"] = nullptr;
  j["lambda_min"] = nullptr;
  j["delta"] = nullptr;
  j["rho"] = nullptr;
  j["gamma"] = nullptr;
  j["step_type"] = nullptr;
  j["success"] = row.accepted;
  return j;
}

nlohmann::ordered_json trace_row_json(const TrTraceRow<double>& row) {
  ordered_json j;
  j["iter"] = row.iter;
  j["f"] = row.f;
  j["mu1"] = row.mu1;
  j["sigma_r"] = row.sigma_r;
  j["grad_norm_lift"] = row.grad_norm;
  j["lambda_min"] = row.lambda_min;
  j["delta"] = row.delta;
  j["rho"] = row.rho;
  j["gamma"] = row.gamma;
  j["step_type"] = row.step_type == TrStepType::k1 ? "K1" : "K2";
  j["success"] = row.success;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  try {
    cfg.problem = j.at("problem").get<std::string>();
    cfg.solver = j.value("solver", std::string("p2gd"));
    cfg.lift = j.value("lift", std::string("lr"));
    cfg.m = j.value("m", cfg.m);
    cfg.n = j.value("n", cfg.n);
    cfg.r = j.value("r", cfg.r);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.output = j.value("output", std::string());
    cfg.classify_eps = j.value("classify_eps", cfg.classify_eps);
    cfg.epsilon = j.value("epsilon", cfg.epsilon);
    cfg.sequence_len = j.value("sequence_len", cfg.sequence_len);
    if (j.contains("p2gd")) {
      const auto& p = j.at("p2gd");
      cfg.p2gd.tau = p.value("tau", cfg.p2gd.tau);
      cfg.p2gd.alpha_init = p.value("alpha_init", cfg.p2gd.alpha_init);
      cfg.p2gd.backtrack_factor = p.value("backtrack_factor", cfg.p2gd.backtrack_factor);
      cfg.p2gd.max_iters = p.value("max_iters", cfg.p2gd.max_iters);
      cfg.p2gd.stop_mu1 = p.value("stop_mu1", cfg.p2gd.stop_mu1);
      cfg.p2gd.max_backtracks = p.value("max_backtracks", cfg.p2gd.max_backtracks);
    }
    if (j.contains("hrtr")) {
      const auto& h = j.at("hrtr");
      cfg.tr.gamma_c = h.value("gamma_c", cfg.tr.gamma_c);
      cfg.tr.eta = h.value("eta", cfg.tr.eta);
      cfg.tr.gamma_lo = h.value("gamma_lo", cfg.tr.gamma_lo);
      cfg.tr.gamma_hi = h.value("gamma_hi", cfg.tr.gamma_hi);
      cfg.tr.gamma0 = h.value("gamma0", cfg.tr.gamma0);
      cfg.tr.max_iters = h.value("max_iters", cfg.tr.max_iters);
      cfg.tr.stop_eps1 = h.value("stop_eps1", cfg.tr.stop_eps1);
      cfg.tr.stop_eps2 = h.value("stop_eps2", cfg.tr.stop_eps2);
      cfg.tr.use_tcg = h.value("use_tcg", cfg.tr.use_tcg);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad config: ") + e.what());
  }
  return cfg;
}

void ExperimentConfig::validate() const {
  if (problem != "apocalypse" && problem != "linear" && problem != "quadratic_distance" &&
      problem != "appendix_e")
    throw std::invalid_argument("unknown problem: " + problem);
  if (solver != "p2gd" && solver != "hrtr")
    throw std::invalid_argument("unknown solver: " + solver);
  if (lift != "lr" && lift != "stiefel") throw std::invalid_argument("unknown lift: " + lift);
  if (solver == "p2gd" && problem == "appendix_e")
    throw std::invalid_argument("appendix_e is a certification experiment; use solver hrtr");
  if (r < 1) throw std::invalid_argument("rank bound must be >= 1");
  if (m < 1 || n < 1 || r > std::min(m, n))
    throw std::invalid_argument("need 1 <= r <= min(m, n)");
  if (output.empty()) throw std::invalid_argument("output path prefix required");
  p2gd.validate();
  tr.validate();
}

int run_experiment(const ExperimentConfig& cfg, ExperimentOutput* out) {
  ordered_json summary;
  TraceWriter trace;
  try {
    cfg.validate();
    summary["problem"] = cfg.problem;
    summary["solver"] = cfg.solver;
    if (cfg.solver == "hrtr") summary["lift"] = cfg.lift;
    summary["seed"] = cfg.seed;
    if (cfg.problem == "apocalypse")
      run_apocalypse(cfg, trace, summary);
    else if (cfg.problem == "linear")
      run_linear(cfg, trace, summary);
    else if (cfg.problem == "quadratic_distance")
      run_quadratic(cfg, trace, summary);
    else
      run_appendix_e(cfg, trace, summary);

    const std::string trace_path = cfg.output + ".jsonl";
    const std::string summary_path = cfg.output + ".summary.json";
    trace.write(trace_path);
    std::ofstream os(summary_path);
    if (!os) throw std::invalid_argument("cannot open summary output: " + summary_path);
    os << summary.dump(2) << '\n';
    if (out) *out = ExperimentOutput{summary, trace_path, summary_path};
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace apocalift::harness

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "apocalift/bounded_rank.hpp"
#include "apocalift/costs.hpp"
#include "apocalift/harness.hpp"
#include "apocalift/io.hpp"
#include "apocalift/svd.hpp"
#include "apocalift/tensor_lifts.hpp"

namespace {

using apocalift::DenseTensor;
using apocalift::Index;
using apocalift::MatrixX;
using nlohmann::ordered_json;

std::vector<Index> parse_ranks(const std::string& spec) {
  std::vector<Index> ranks;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    ranks.push_back(std::stol(item));
  }
  if (ranks.empty()) throw CLI::ValidationError("--ranks", "expected a comma-separated list");
  return ranks;
}

int cmd_demo(const std::string& solver, const std::string& lift, const std::string& out_dir) {
  apocalift::harness::ExperimentConfig cfg;
  cfg.problem = "apocalypse";
  cfg.solver = solver;
  cfg.lift = lift;
  cfg.m = 3;
  cfg.n = 3;
  cfg.r = 2;
  cfg.output = out_dir + "/apocalypse_" + solver + (solver == "hrtr" ? "_" + lift : "");
  cfg.p2gd.tau = 0.2;
  cfg.p2gd.alpha_init = 1.6;
  cfg.p2gd.backtrack_factor = 0.5;
  cfg.p2gd.max_iters = 30;
  cfg.p2gd.stop_mu1 = 0;
  apocalift::harness::ExperimentOutput out;
  const int rc = apocalift::harness::run_experiment(cfg, &out);
  if (rc == 0) {
    std::cout << out.summary.dump(2) << '\n';
    std::cout << "trace: " << out.trace_path << '\n';
  }
  return rc;
}

int cmd_run(const std::string& config_path) {
  std::ifstream f(config_path);
  if (!f) {
    std::cerr << "config error: cannot open " << config_path << '\n';
    return 1;
  }
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  }
  apocalift::harness::ExperimentConfig cfg;
  try {
    cfg = apocalift::harness::ExperimentConfig::from_json(j);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  }
  apocalift::harness::ExperimentOutput out;
  const int rc = apocalift::harness::run_experiment(cfg, &out);
  if (rc == 0) std::cout << out.summary.dump(2) << '\n';
  return rc;
}

int cmd_project(const std::string& matrix_path, Index rank) {
  try {
    const MatrixX<double> m = apocalift::read_matrix_file(matrix_path);
    if (rank < 0 || rank > std::min(m.rows(), m.cols())) {
      std::cerr << "config error: rank out of range for the given matrix\n";
      return 1;
    }
    const double rank_tol = apocalift::harness::rank_tol_from_env();
    const MatrixX<double> projected = apocalift::truncated_svd_projection(m, rank);
    apocalift::write_matrix_text(std::cout, projected);
    // Stationarity of the projected point for f(X) = 1/2 |X - M|^2.
    const apocalift::StationarityReport<double> rep = apocalift::stationarity_report(
        projected, rank, apocalift::quadratic_distance_cost<double>(m), rank_tol);
    ordered_json j;
    j["mu1"] = rep.mu1;
    j["mu2"] = rep.mu2;
    j["grad_norm"] = rep.grad_norm;
    j["sigma_r"] = rep.sigma_r;
    j["projection_error"] = (m - projected).norm();
    std::cout << j.dump() << '\n';
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  }
}

int cmd_tensor(const std::string& mode, const std::string& tensor_path,
               const std::string& ranks_spec) {
  try {
    const DenseTensor<double> t = apocalift::read_tensor_file(tensor_path);
    const std::vector<Index> ranks = parse_ranks(ranks_spec);
    const double rank_tol = apocalift::harness::rank_tol_from_env();
    ordered_json j;
    j["mode"] = mode;
    j["dims"] = t.dims();
    j["ranks"] = ranks;
    if (mode == "hosvd") {
      const apocalift::TuckerParams<double> p = apocalift::tucker_hosvd(t, ranks, rank_tol);
      const DenseTensor<double> back = apocalift::tucker_apply(p);
      Index rank_sum = 0;
      for (Index r : ranks) rank_sum += r;
      j["reconstruction_error"] = (back.values() - t.values()).norm();
      j["params_norm"] = p.norm();
      j["norm_identity_rhs"] = std::sqrt(t.norm() * t.norm() + rank_sum);
      j["core_norm"] = p.core.norm();
    } else {
      const apocalift::TTParams<double> p = apocalift::tt_svd(t, ranks, rank_tol);
      const DenseTensor<double> back = apocalift::tt_apply(p);
      Index bond_sum = 0;
      for (Index r : ranks) bond_sum += r;
      j["reconstruction_error"] = (back.values() - t.values()).norm();
      j["params_norm"] = p.norm();
      j["norm_identity_rhs"] = std::sqrt(bond_sum + t.norm() * t.norm());
    }
    std::cout << j.dump(2) << '\n';
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"low-rank optimization on the bounded-rank variety: solvers, lifts, diagnostics"};
  app.require_subcommand(1);

  auto* demo = app.add_subcommand("demo", "run a canned experiment");
  auto* demo_apoc = demo->add_subcommand(
      "apocalypse", "projected gradient stalling at a rank drop, or its trust-region escape");
  std::string solver = "p2gd";
  std::string lift = "lr";
  std::string out_dir = ".";
  demo_apoc->add_option("--solver", solver, "p2gd or hrtr")
      ->check(CLI::IsMember({"p2gd", "hrtr"}));
  demo_apoc->add_option("--lift", lift, "lr or stiefel (hrtr only)")
      ->check(CLI::IsMember({"lr", "stiefel"}));
  demo_apoc->add_option("--out", out_dir, "output directory");
  demo->require_subcommand(1);

  auto* run = app.add_subcommand("run", "run an experiment described by a JSON config");
  std::string config_path;
  run->add_option("--config", config_path, "path to the JSON config")->required();

  auto* project = app.add_subcommand(
      "project", "project a matrix onto the variety and report stationarity measures");
  std::string matrix_path;
  Index rank = 1;
  project->add_option("--matrix", matrix_path, "path to a matrix text file")->required();
  project->add_option("--rank", rank, "rank bound")->required();

  auto* tensor = app.add_subcommand("tensor", "tensor decompositions");
  std::string tensor_path;
  std::string ranks_spec;
  auto* hosvd = tensor->add_subcommand("hosvd", "Tucker decomposition via HOSVD");
  auto* ttsvd = tensor->add_subcommand("ttsvd", "tensor-train decomposition via TT-SVD");
  for (auto* sub : {hosvd, ttsvd}) {
    sub->add_option("--tensor", tensor_path, "path to a tensor text file")->required();
    sub->add_option("--ranks", ranks_spec, "comma-separated ranks")->required();
  }
  tensor->require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (demo_apoc->parsed()) return cmd_demo(solver, lift, out_dir);
  if (run->parsed()) return cmd_run(config_path);
  if (project->parsed()) return cmd_project(matrix_path, rank);
  if (hosvd->parsed()) return cmd_tensor("hosvd", tensor_path, ranks_spec);
  if (ttsvd->parsed()) return cmd_tensor("ttsvd", tensor_path, ranks_spec);
  return 1;
}

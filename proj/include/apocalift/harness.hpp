#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "apocalift/p2gd.hpp"
#include "apocalift/trust_region.hpp"
#include "apocalift/types.hpp"

namespace apocalift::harness {

/// One canned or configured experiment. `problem` selects the cost and the
/// starting data, `solver` how it is driven. The seed shapes random instances
/// only; the canned demos are deterministic.
struct ExperimentConfig {
  std::string problem;       // apocalypse | linear | quadratic_distance | appendix_e
  std::string solver;        // p2gd | hrtr
  std::string lift = "lr";   // lr | stiefel (hrtr only)
  Index m = 3;
  Index n = 3;
  Index r = 2;
  std::uint64_t seed = 0;
  std::string output;        // path prefix for <output>.jsonl and <output>.summary.json
  P2gdConfig<double> p2gd;
  TrConfig<double> tr;
  double classify_eps = 1e-4;  // apocalypse/serendipity threshold for diagnostics
  double epsilon = 1e-3;       // scale of the sharpness instance
  Index sequence_len = 30;     // length of hand-built diagnostic sequences

  static ExperimentConfig from_json(const nlohmann::json& j);
  void validate() const;
};

/// Default rank tolerance, overridable through APOCALIFT_RANK_TOL.
double rank_tol_from_env();

/// Fixed JSONL schema shared by both solvers; fields that do not apply to a
/// row are null.
nlohmann::ordered_json trace_row_json(const P2gdTraceRow<double>& row);
nlohmann::ordered_json trace_row_json(const TrTraceRow<double>& row);

struct ExperimentOutput {
  nlohmann::ordered_json summary;
  std::string trace_path;
  std::string summary_path;
};

/// Runs the experiment, writing <output>.jsonl and <output>.summary.json.
/// Returns 0 on success, 1 on configuration errors, 2 on numerical failure.
int run_experiment(const ExperimentConfig& cfg, ExperimentOutput* out = nullptr);

}  // namespace apocalift::harness

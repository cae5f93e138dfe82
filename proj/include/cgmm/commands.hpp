#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgmm/em.hpp"
#include "cgmm/monte_carlo.hpp"
#include "cgmm/penalized.hpp"

namespace cgmm {

/// Settings for one CLI invocation. Serialized as a flat JSON object; every
/// key appears in `--print-config` output and unknown keys are rejected.
struct RunConfig {
  std::string command;
  std::string data;
  std::string out;
  std::string params;  // params JSON to use instead of fitting

  int g = 0;  // 0: choose G by BIC over 1..g_max
  int g_max = 6;
  int max_iter = 500;
  double tol = 1e-8;
  int n_starts = 5;
  std::uint64_t seed = 1;
  std::string init = "kmeans";
  int threads = 1;

  // 1-based covariate columns; empty means all columns.
  std::vector<int> gate_cols;
  std::vector<int> mean_cols;
  bool gate_intercept = true;
  bool mean_intercept = true;

  std::optional<double> lambda;
  std::vector<double> lambda_grid;  // empty: 50 log-spaced values from 100 to 0.1
  int folds = 10;
  double selection_lambda = 1.0;
  int cd_max_cycles = 1000;
  double cd_tol = 1e-8;

  std::string model = "M1";
  Index n = 1000;
  Index N = 20000;
  Index q = 15;
  int reps = 200;
  std::vector<std::string> methods{"full", "gmm", "cgmm"};
  bool coverage = false;
  int groups = 100;
  int jackknife_max_iter = 50;
  std::string estimator = "summary";  // summary (Q1, median, mean, Q3) or mean
  int column = 1;

  nlohmann::json to_json() const;
  /// Overlays `j` on the defaults for `j["command"]` (or `command`).
  static RunConfig from_json(const nlohmann::json& j, const std::string& command = "");

  FitConfig fit_config() const;
  PenaltyConfig penalty_config() const;
  DesignSpec design(Index q_data) const;
  MonteCarloOptions monte_carlo_options() const;
  SimModelSpec sim_spec() const;
};

RunConfig default_config(const std::string& command);

int cmd_fit(const RunConfig& cfg, std::ostream& out, std::ostream& log);
int cmd_impute(const RunConfig& cfg, std::ostream& out, std::ostream& log);
int cmd_select_g(const RunConfig& cfg, std::ostream& out, std::ostream& log);
int cmd_cv(const RunConfig& cfg, std::ostream& out, std::ostream& log);
int cmd_jackknife(const RunConfig& cfg, std::ostream& out, std::ostream& log);
int cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& log);
int cmd_generate(const RunConfig& cfg, std::ostream& out, std::ostream& log);

/// Full CLI entry point. Returns 0 on success, 1 for usage errors, 2 for
/// data errors and 3 for numerical failures, writing a one-line reason to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cgmm

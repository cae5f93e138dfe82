#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cgmm/em.hpp"
#include "cgmm/penalized.hpp"
#include "cgmm/sim.hpp"

namespace cgmm {

enum class Method { Full, GMM, CGMM, PenalizedCGMM };

std::string method_name(Method method);
Method parse_method(const std::string& name);

struct MonteCarloOptions {
  int reps = 200;
  std::uint64_t seed = 1;
  int g_max = 6;
  FitConfig fit;  // G, seed and threads are set per fit
  PenaltyConfig pen;
  bool coverage = false;  // jackknife CIs for the CGMM mean estimator
  int jackknife_groups = 100;
  int jackknife_max_iter = 50;
  int threads = 1;

  void validate() const;
};

struct MetricReport {
  Method method = Method::Full;
  int successes = 0;
  int failures = 0;
  double rmspe = 0.0;  // averages over successful replicates; NaN for Full
  double mae = 0.0;
  double bias = 0.0;  // of theta_hat - theta
  double var = 0.0;
  double mse = 0.0;
  int coverage_hits = 0;
  int coverage_trials = 0;
  // Per replicate, NaN (or 0 for G) where the replicate failed.
  std::vector<double> rep_rmspe;
  std::vector<double> rep_mae;
  std::vector<double> rep_error;
  std::vector<int> rep_g;
  std::vector<IndexList> rep_support;  // penalized fits: covariates with a nonzero slope
  std::vector<std::string> failure_reasons;
};

struct MonteCarloReport {
  SimModelSpec spec;
  int reps = 0;
  std::uint64_t seed = 0;
  std::vector<MetricReport> methods;  // canonical method order

  const MetricReport& get(Method method) const;
};

/// Replicates generate -> fit (BIC over G = 1..g_max) -> impute -> metrics
/// for each method. Replicate r uses a population seeded from (seed, r);
/// each method's fitting seed also depends on the method, so results do not
/// depend on the order of `methods`. Throws NumericalError when more than 5%
/// of the replicates of any method fail.
MonteCarloReport monte_carlo(const SimModelSpec& spec, std::vector<Method> methods,
                             const MonteCarloOptions& options);

std::string format_report(const MonteCarloReport& report);

}  // namespace cgmm

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cgmm/model.hpp"

namespace cgmm {

/// Data-generating models. M1-M4 have two covariates, M5-M6 have `q`
/// covariates (15 by default) and M7 is a synthetic stand-in for an
/// administrative-record matching survey with a ratio-form expert mean.
enum class SimModel { M1, M2, M3, M4, M5, M6, M7 };

std::string to_string(SimModel model);
SimModel parse_sim_model(const std::string& name);

struct SimModelSpec {
  SimModel model = SimModel::M1;
  Index n = 1000;
  Index N = 20000;
  std::uint64_t seed = 1;
  Index q = 15;  // M5 and M6 only

  void validate() const;
};

struct SimData {
  Dataset sample;  // responses masked by the response indicators
  Matrix y_full;   // the same sample before masking
  IndexList sample_rows;
  Matrix x_population;
  Matrix y_population;
  std::vector<int> population_labels;  // covariate mixture label, 0-based
  std::vector<int> population_regime;  // expert regime h (0 or 1) for M2-M6, else -1
  double threshold = 0.0;              // 60% quantile of the latent U
  double theta = 0.0;                  // finite-population mean of y
  DesignSpec design;                   // design to fit with
  std::vector<std::string> x_names;
  std::vector<std::string> y_names;
};

/// Draws a finite population of size N, a simple random sample of size n
/// and Bernoulli response indicators with logit(q_i) = -0.5 + 0.5 x_{1i}.
/// Deterministic in `spec.seed`.
SimData generate(const SimModelSpec& spec);

double response_probability(double x1);

/// Type-7 sample quantile.
double sample_quantile(std::vector<double> values, double prob);

/// Closed-form log f*(y | x) of models M1-M4 given the realized threshold.
double true_conditional_logpdf(SimModel model, const Eigen::Ref<const Vector>& x_row,
                               const Eigen::Ref<const Vector>& y_row, double threshold);

}  // namespace cgmm

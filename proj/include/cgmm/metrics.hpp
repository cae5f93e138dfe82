#pragma once

#include <vector>

#include "cgmm/model.hpp"

namespace cgmm {

struct PredictionError {
  double rmspe = 0.0;
  double mae = 0.0;
  Index missing = 0;
};

/// Prediction error over the nonrespondent cells (delta == false) only.
/// Throws DataError("metrics undefined") when every cell is observed.
PredictionError compute_metrics(const Matrix& truth, const Matrix& imputed, const Mask& delta);

struct EstimatorSummary {
  double bias = 0.0;
  double var = 0.0;
  double mse = 0.0;
};

/// Summaries of estimation errors e_r = theta_hat_r - theta_r. The variance
/// uses divisor R so that mse == bias^2 + var.
EstimatorSummary summarize_errors(const std::vector<double>& errors);

}  // namespace cgmm

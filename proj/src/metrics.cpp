#include "cgmm/metrics.hpp"

#include <cmath>

#include "cgmm/errors.hpp"

namespace cgmm {

PredictionError compute_metrics(const Matrix& truth, const Matrix& imputed, const Mask& delta) {
  if (truth.rows() != imputed.rows() || truth.cols() != imputed.cols() ||
      truth.rows() != delta.rows() || truth.cols() != delta.cols()) {
    throw DataError("metrics: shape mismatch");
  }
  PredictionError out;
  double sq = 0.0, abs = 0.0;
  for (Index i = 0; i < truth.rows(); ++i) {
    for (Index j = 0; j < truth.cols(); ++j) {
      if (delta(i, j)) continue;
      const double e = imputed(i, j) - truth(i, j);
      sq += e * e;
      abs += std::abs(e);
      ++out.missing;
    }
  }
  if (out.missing == 0) throw DataError("metrics undefined");
  const auto m = static_cast<double>(out.missing);
  out.rmspe = std::sqrt(sq / m);
  out.mae = abs / m;
  return out;
}

EstimatorSummary summarize_errors(const std::vector<double>& errors) {
  if (errors.empty()) throw DataError("no replicates to summarize");
  const auto r = static_cast<double>(errors.size());
  EstimatorSummary s;
  for (double e : errors) s.bias += e;
  s.bias /= r;
  for (double e : errors) s.var += (e - s.bias) * (e - s.bias);
  s.var /= r;
  s.mse = s.bias * s.bias + s.var;
  return s;
}

}  // namespace cgmm

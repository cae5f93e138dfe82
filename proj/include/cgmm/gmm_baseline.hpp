#pragma once

#include <vector>

#include "cgmm/em.hpp"
#include "cgmm/imputation.hpp"

namespace cgmm {

/// Joint Gaussian mixture over (x, y). It is fitted as a CGMM whose gate and
/// expert means are intercept-only and whose response is the stacked
/// vector (x, y), with x always observed.
struct GmmFit {
  FitReport report;
  Index q = 0;
  Index p = 0;

  /// Conditional-mean imputation of y given x and the observed part of y.
  ImputationResult impute(const Dataset& data) const;

  /// log f(y | x) = log f(x, y) - log f(x).
  double conditional_logpdf(const Eigen::Ref<const Vector>& x_row,
                            const Eigen::Ref<const Vector>& y_row) const;
};

Dataset joint_dataset(const Dataset& data);

GmmFit fit_gmm_baseline(const Dataset& data, int G, const FitConfig& cfg);

struct GmmSelection {
  int best_g = 0;
  std::vector<std::pair<int, double>> bic;
  GmmFit best;
};

GmmSelection select_gmm(const Dataset& data, const FitConfig& cfg, const std::vector<int>& g_range);

}  // namespace cgmm

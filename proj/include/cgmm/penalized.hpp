#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cgmm/em.hpp"

namespace cgmm {

/// Lasso shrinkage operator: sign(z) * max(|z| - gamma, 0).
double soft_threshold(double z, double gamma);

/// `count` log-spaced values from `hi` down to `lo`.
std::vector<double> lambda_grid(int count = 50, double hi = 100.0, double lo = 0.1);

struct PenaltyConfig {
  std::vector<double> lambda_grid = cgmm::lambda_grid();
  int cv_folds = 10;
  int inner_cd_iter = 1000;
  double cd_tol = 1e-8;
  // Shrinkage used when G is chosen by BIC ahead of the lambda search.
  double selection_lambda = 1.0;

  void validate() const;
};

/// Penalized CGMM for scalar y: `alpha` is G x (q+1) with a zero first row,
/// `beta` is (q+1) x G with intercepts in row 0.
struct PenalizedParams {
  Matrix alpha;
  Matrix beta;
  Vector sigma2;

  Index G() const { return alpha.rows(); }
  CgmmParams to_cgmm(Index q) const;
};

struct CdOptions {
  int max_cycles = 1000;
  double tol = 1e-8;
};

/// Weighted lasso objective 0.5 * sum_i w_i r_i^2 + lambda * sum_{j>=1} |beta_j|,
/// r = y - beta_0 - x * beta_{1..q}.
double penalized_ls_objective(const Matrix& x, const Vector& y, const Vector& w,
                              const Vector& beta, double lambda);

/// Cyclic coordinate descent for the weighted lasso above. The intercept is
/// refreshed at the start of each cycle and is not penalized.
Vector cd_update_beta(const Matrix& x, const Vector& y, const Vector& w, Vector beta,
                      double lambda, const CdOptions& options = {});

struct GateQuadraticUpdate {
  Matrix alpha;
  std::vector<std::string> warnings;
};

/// One partial Newton step on the gate: for g = 2..G a weighted quadratic
/// approximation built from the component's binary-logistic probability,
/// minimized with lasso coordinate descent.
GateQuadraticUpdate gate_partial_quadratic(const Matrix& x, const Matrix& pi, const Matrix& alpha,
                                           double lambda, const CdOptions& options = {});

struct PenalizedFit {
  PenalizedParams params;  // original covariate scale
  PenalizedParams scaled;  // standardized scale, usable as a warm start
  FitReport report;        // params mirrored as CgmmParams, trace of the penalized objective
  double objective = 0.0;
  double loglik = 0.0;
  Index nonzero = 0;
};

/// Penalized EM at a single lambda. `warm` (standardized scale) skips the
/// random restarts and starts from the given parameters.
PenalizedFit fit_penalized_em(const Dataset& data, const FitConfig& cfg, const PenaltyConfig& pen,
                              double lambda, const std::optional<PenalizedParams>& warm = {});

/// Degrees of freedom used for BIC of a penalized fit: free gate intercepts,
/// expert intercepts and variances plus the nonzero slopes.
double penalized_bic(const PenalizedFit& fit, Index n);

struct CvResult {
  double best_lambda = 0.0;
  std::vector<double> lambdas;
  std::vector<double> cv_error;
  std::vector<double> cv_se;
  int folds = 0;
  std::vector<std::string> warnings;
};

CvResult cv_select_lambda(const Dataset& data, const FitConfig& cfg, const PenaltyConfig& pen);

struct PenalizedSelection {
  int best_g = 0;
  std::vector<std::pair<int, double>> bic;  // (G, BIC) for every successful fit
};

/// Chooses G by BIC at `pen.selection_lambda`.
PenalizedSelection select_g_penalized(const Dataset& data, const FitConfig& cfg,
                                      const PenaltyConfig& pen, const std::vector<int>& g_range);

/// Mean of y given x only (gate-weighted expert means), per row of `x`.
Vector predict_mean(const PenalizedParams& params, const Matrix& x);

}  // namespace cgmm

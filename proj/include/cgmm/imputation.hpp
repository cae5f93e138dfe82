#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cgmm/em.hpp"

namespace cgmm {

/// Fractional imputation record for one unit with missing responses:
/// component weights and, per component, the conditional mean of the
/// missing coordinates (one row per component).
struct FractionalRecord {
  Index row = 0;
  IndexList missing;
  Vector weights;
  Matrix means;
};

struct ImputationResult {
  Matrix y_imputed;
  std::vector<FractionalRecord> fractional;
  CgmmParams params_used;
};

/// Fills every missing response with the weighted sum of component
/// conditional means; observed entries pass through unchanged.
ImputationResult impute(const Dataset& data, const CgmmParams& params);

Vector estimate_mean(const Dataset& data, const ImputationResult& result);

/// U(xi; x_i, y_i) returning a vector of the same length as xi.
using EstimatingFunction =
    std::function<Vector(const Vector& xi, const Vector& x_row, const Vector& y_row)>;

struct SolverOptions {
  int max_iter = 100;
  double tol = 1e-10;
};

/// Root of n^-1 sum_i sum_g w_ig U(xi; x_i, y_ig) = 0, where y_ig completes
/// row i with component g's conditional mean. Damped Newton with a
/// forward-difference Jacobian.
Vector solve_estimating_equation(const Dataset& data, const ImputationResult& result,
                                 const EstimatingFunction& U, const Vector& xi0,
                                 const SolverOptions& options = {});

/// Smallest xi with n^-1 sum_i sum_g w_ig 1{y_ig <= xi} >= tau for one
/// response column; the root of the step-function estimating equation.
double fractional_quantile(const Dataset& data, const ImputationResult& result, Index column,
                           double tau);

struct JackknifeReport {
  Vector point;
  Vector variance;
  Vector ci_lower;
  Vector ci_upper;
  int n_groups = 0;
};

using Pipeline = std::function<Vector(const Dataset&)>;
using Estimator = std::function<Vector(const Dataset&, const ImputationResult&)>;

/// Delete-a-group jackknife over `n_groups` contiguous blocks of a seeded
/// row permutation.
JackknifeReport jackknife(const Dataset& data, const Pipeline& pipeline, int n_groups,
                          std::uint64_t seed, int threads = 1);

/// Row blocks used by `jackknife`, exposed for tests.
std::vector<IndexList> jackknife_groups(Index n, int n_groups, std::uint64_t seed);

/// Refit-and-estimate pipeline: EM warm-started from `full_fit` for at most
/// `cfg.max_iter` iterations, then imputation and `estimator`.
Pipeline warm_start_pipeline(CgmmParams full_fit, FitConfig cfg, Estimator estimator);

/// First quartile, median, mean and third quartile of one response column.
Estimator summary_estimator(Index column);

Estimator mean_estimator();

}  // namespace cgmm

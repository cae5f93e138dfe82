#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cgmm/model.hpp"

namespace cgmm {

enum class InitMethod { kmeans, random_responsibility };

struct FitConfig {
  int G = 1;
  int max_iter = 500;
  double tol = 1e-8;
  int n_starts = 5;
  std::uint64_t seed = 1;
  InitMethod init = InitMethod::kmeans;
  int threads = 1;

  void validate() const;
};

struct FitReport {
  CgmmParams params;
  std::vector<double> loglik_trace;
  bool converged = false;
  double bic = 0.0;
  int n_iter = 0;
  int best_start = 0;
  std::vector<std::string> warnings;

  double loglik() const { return loglik_trace.empty() ? 0.0 : loglik_trace.back(); }
};

struct GateOptions {
  int max_iter = 50;
  int max_halvings = 20;
  double coef_cap = 30.0;
  double grad_tol_per_row = 1e-8;
};

struct GateUpdate {
  Matrix alpha;
  int iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
  bool separation = false;
};

struct ExpertUpdate {
  std::vector<Matrix> B;
  std::vector<Matrix> Sigma;
  std::vector<std::string> warnings;
};

/// Posterior membership probabilities given x and the observed part of y.
/// Rows without any observed y get the gate probabilities.
Responsibilities e_step(const Dataset& data, const CgmmParams& params);

/// Solves the responsibility-weighted multinomial-logit score equations by
/// Newton-Raphson with step halving, starting from `alpha_init`.
GateUpdate m_step_gate(const Dataset& data, const DesignSpec& design, const Responsibilities& pi,
                       const Matrix& alpha_init, const GateOptions& options = {});

/// Responsibility-weighted Gaussian regression update for every expert.
/// Partially observed rows contribute through one conditional-expectation
/// sweep evaluated at `current`; rows with no observed y contribute nothing.
ExpertUpdate m_step_experts(const Dataset& data, const Responsibilities& pi,
                            const CgmmParams& current);

double observed_loglik(const Dataset& data, const CgmmParams& params);

/// Free parameter count: gate rows 2..G, expert coefficients, covariances.
Index bic_dof(Index G, Index gate_dim, Index mean_dim, Index p);
double bic(const FitReport& report, Index n);

FitReport fit_em(const Dataset& data, const DesignSpec& design, const FitConfig& cfg);

/// Single EM run started from `init` (used for warm-started refits).
FitReport fit_em_from(const Dataset& data, const CgmmParams& init, const FitConfig& cfg);

struct GFit {
  int G = 0;
  std::optional<FitReport> report;
  std::string error;
};

struct Selection {
  int best_g = 0;
  std::vector<GFit> fits;

  const FitReport& best() const;
};

Selection select_g(const Dataset& data, const DesignSpec& design, const FitConfig& cfg,
                   const std::vector<int>& g_range);

/// Reorders components by descending leading expert coefficient and
/// re-references the gate to the new first component.
CgmmParams canonicalize(const CgmmParams& params);

namespace detail {

/// Precomputed per-dataset quantities shared across EM iterations.
struct FitContext {
  FitContext(const Dataset& data, const DesignSpec& design);

  const Dataset& data;
  DesignSpec design;
  Matrix gate_x;
  Matrix mean_x;
  double cov_floor;
  // Rows grouped by their missingness pattern.
  struct Pattern {
    IndexList obs;
    IndexList mis;
    IndexList rows;
  };
  std::vector<Pattern> patterns;
  bool scalar_y;
};

/// n x G matrix of log gate probability plus observed-block log-density.
Matrix joint_log_terms(const FitContext& ctx, const CgmmParams& params);

/// Normalizes log terms into responsibilities; returns the observed log-likelihood.
double normalize_terms(const Matrix& terms, Matrix& pi);

GateUpdate gate_newton(const Matrix& gate_x, const Matrix& pi, const Matrix& alpha_init,
                       const GateOptions& options);

ExpertUpdate update_experts(const FitContext& ctx, const Matrix& pi, const CgmmParams& current);

/// Starting responsibilities for restart `start`.
Matrix initial_responsibilities(const Dataset& data, int G, InitMethod method,
                                std::mt19937_64& rng);

std::vector<int> kmeans(const Matrix& points, int k, std::mt19937_64& rng, int max_iter = 50);

}  // namespace detail

}  // namespace cgmm

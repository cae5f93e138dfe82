#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace cgmm {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using IndexList = std::vector<Index>;

/// Sample with always-observed covariates `x` (n x q) and study variables
/// `y` (n x p). `delta(i, j)` is true when y(i, j) was observed; unobserved
/// entries of `y` are ignored by every routine.
struct Dataset {
  Matrix x;
  Matrix y;
  Mask delta;

  Index n() const { return x.rows(); }
  Index q() const { return x.cols(); }
  Index p() const { return y.cols(); }

  /// Throws DataError when shapes disagree or observed values are not finite.
  void validate() const;

  IndexList observed(Index row) const;
  IndexList missing(Index row) const;
  bool row_complete(Index row) const { return delta.row(row).all(); }
  bool row_empty(Index row) const { return !delta.row(row).any(); }
  Index missing_count() const;
};

Dataset subset_rows(const Dataset& data, const IndexList& rows);

/// Which covariate columns enter the gate and the expert means. The default
/// is "every column, both intercepts on"; the ratio model uses a mean design
/// with a single column and no intercept.
struct DesignSpec {
  IndexList gate_covariates;
  IndexList mean_covariates;
  bool gate_intercept = true;
  bool mean_intercept = true;

  static DesignSpec full(Index q);
  static DesignSpec intercept_only();

  Index gate_dim() const {
    return static_cast<Index>(gate_covariates.size()) + (gate_intercept ? 1 : 0);
  }
  Index mean_dim() const {
    return static_cast<Index>(mean_covariates.size()) + (mean_intercept ? 1 : 0);
  }

  void validate(Index q) const;

  Vector gate_row(const Eigen::Ref<const Vector>& x_row) const;
  Vector mean_row(const Eigen::Ref<const Vector>& x_row) const;
  Matrix gate_design(const Matrix& x) const;
  Matrix mean_design(const Matrix& x) const;

  bool operator==(const DesignSpec&) const = default;
};

/// Conditional Gaussian mixture parameters.
///
/// Row 0 of `alpha` is the reference category and is identically zero.
/// `B[g]` is mean_dim x p, so the component-g mean of y given x is
/// `mean_row(x)' * B[g]`; `Sigma[g]` is the p x p residual covariance.
struct CgmmParams {
  DesignSpec design;
  Matrix alpha;
  std::vector<Matrix> B;
  std::vector<Matrix> Sigma;

  Index G() const { return alpha.rows(); }
  Index p() const { return Sigma.empty() ? 0 : Sigma.front().rows(); }

  /// Throws DataError on inconsistent shapes or a nonzero reference row.
  void validate() const;
};

/// Posterior component-membership probabilities, one row per unit.
struct Responsibilities {
  Matrix pi;
};

struct GaussianBlock {
  Vector mean;
  Matrix cov;
  IndexList obs_idx;
  IndexList mis_idx;
};

struct ConditionalGaussian {
  Vector mean;
  Matrix cov;
};

/// Multinomial-logit gate probabilities for one augmented covariate row.
Vector gate_probs(const Eigen::Ref<const Vector>& gate_row, const Matrix& alpha);

/// Row-wise gate log-probabilities for a whole gate design matrix (n x G).
Matrix gate_log_probs(const Matrix& gate_design, const Matrix& alpha);

/// Multivariate normal log-density through a Cholesky factor. An empty
/// vector has log-density 0. When the factorization fails and `floor` is
/// positive the diagonal is raised by `floor` and the factorization retried.
double gaussian_logpdf(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& mean,
                       const Eigen::Ref<const Matrix>& cov, double floor = 0.0);

/// Distribution of the `mis_idx` coordinates given the `obs_idx` ones.
ConditionalGaussian conditional_gaussian(const GaussianBlock& block, const Vector& y_obs,
                                         double floor = 0.0);

Vector component_mean(const DesignSpec& design, const Eigen::Ref<const Vector>& x_row,
                      const Matrix& B);

/// 1e-8 times the largest per-column variance of the observed y values.
double covariance_floor(const Dataset& data);

/// Symmetrizes `cov` and raises every eigenvalue to at least `floor`.
Matrix floor_covariance(const Matrix& cov, double floor);

Matrix select(const Matrix& m, const IndexList& rows, const IndexList& cols);
Vector select(const Vector& v, const IndexList& idx);

}  // namespace cgmm

namespace cgmm {

/// log f(y | x) under the fitted mixture, for a fully specified y row.
double mixture_logpdf(const CgmmParams& params, const Eigen::Ref<const Vector>& x_row,
                      const Eigen::Ref<const Vector>& y_row);

}  // namespace cgmm

#include "cgmm/model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cgmm/errors.hpp"

namespace cgmm {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)

void check_columns(const IndexList& cols, Index q, const char* what) {
  for (Index c : cols) {
    if (c < 0 || c >= q) {
      throw DataError(std::string(what) + " column " + std::to_string(c) + " out of range");
    }
  }
}

}  // namespace

void Dataset::validate() const {
  if (n() < 1 || q() < 1 || p() < 1) {
    throw DataError("dataset needs n >= 1, q >= 1 and p >= 1");
  }
  if (y.rows() != n() || delta.rows() != n() || delta.cols() != p()) {
    throw DataError("dataset shapes disagree");
  }
  if (!x.allFinite()) {
    throw DataError("non-finite covariate");
  }
  for (Index i = 0; i < n(); ++i) {
    for (Index j = 0; j < p(); ++j) {
      if (delta(i, j) && !std::isfinite(y(i, j))) {
        throw DataError("observed y(" + std::to_string(i) + "," + std::to_string(j) +
                        ") is not finite");
      }
    }
  }
}

IndexList Dataset::observed(Index row) const {
  IndexList idx;
  for (Index j = 0; j < p(); ++j) {
    if (delta(row, j)) idx.push_back(j);
  }
  return idx;
}

IndexList Dataset::missing(Index row) const {
  IndexList idx;
  for (Index j = 0; j < p(); ++j) {
    if (!delta(row, j)) idx.push_back(j);
  }
  return idx;
}

Index Dataset::missing_count() const { return delta.size() - delta.count(); }

Dataset subset_rows(const Dataset& data, const IndexList& rows) {
  Dataset out;
  const auto m = static_cast<Index>(rows.size());
  out.x.resize(m, data.q());
  out.y.resize(m, data.p());
  out.delta.resize(m, data.p());
  for (Index k = 0; k < m; ++k) {
    out.x.row(k) = data.x.row(rows[k]);
    out.y.row(k) = data.y.row(rows[k]);
    out.delta.row(k) = data.delta.row(rows[k]);
  }
  return out;
}

DesignSpec DesignSpec::full(Index q) {
  DesignSpec d;
  for (Index j = 0; j < q; ++j) {
    d.gate_covariates.push_back(j);
    d.mean_covariates.push_back(j);
  }
  return d;
}

DesignSpec DesignSpec::intercept_only() { return DesignSpec{}; }

void DesignSpec::validate(Index q) const {
  check_columns(gate_covariates, q, "gate");
  check_columns(mean_covariates, q, "mean");
  if (gate_dim() == 0) throw DataError("gate design is empty");
  if (mean_dim() == 0) throw DataError("mean design is empty");
}

Vector DesignSpec::gate_row(const Eigen::Ref<const Vector>& x_row) const {
  Vector z(gate_dim());
  Index k = 0;
  if (gate_intercept) z(k++) = 1.0;
  for (Index c : gate_covariates) z(k++) = x_row(c);
  return z;
}

Vector DesignSpec::mean_row(const Eigen::Ref<const Vector>& x_row) const {
  Vector z(mean_dim());
  Index k = 0;
  if (mean_intercept) z(k++) = 1.0;
  for (Index c : mean_covariates) z(k++) = x_row(c);
  return z;
}

Matrix DesignSpec::gate_design(const Matrix& x) const {
  Matrix z(x.rows(), gate_dim());
  Index k = 0;
  if (gate_intercept) z.col(k++).setOnes();
  for (Index c : gate_covariates) z.col(k++) = x.col(c);
  return z;
}

Matrix DesignSpec::mean_design(const Matrix& x) const {
  Matrix z(x.rows(), mean_dim());
  Index k = 0;
  if (mean_intercept) z.col(k++).setOnes();
  for (Index c : mean_covariates) z.col(k++) = x.col(c);
  return z;
}

void CgmmParams::validate() const {
  const Index g = G();
  if (g < 1) throw DataError("params need at least one component");
  if (alpha.cols() != design.gate_dim()) throw DataError("alpha has wrong width");
  if (!alpha.row(0).isZero(0.0)) throw DataError("alpha reference row must be zero");
  if (static_cast<Index>(B.size()) != g || static_cast<Index>(Sigma.size()) != g) {
    throw DataError("B / Sigma count differs from G");
  }
  const Index pp = Sigma.front().rows();
  for (Index k = 0; k < g; ++k) {
    if (B[k].rows() != design.mean_dim() || B[k].cols() != pp) {
      throw DataError("B[" + std::to_string(k) + "] has wrong shape");
    }
    if (Sigma[k].rows() != pp || Sigma[k].cols() != pp) {
      throw DataError("Sigma[" + std::to_string(k) + "] has wrong shape");
    }
  }
}

Vector gate_probs(const Eigen::Ref<const Vector>& gate_row, const Matrix& alpha) {
  if (!gate_row.allFinite()) throw DataError("non-finite covariate");
  Vector eta = alpha * gate_row;
  eta.array() -= eta.maxCoeff();
  Vector p = eta.array().exp();
  return p / p.sum();
}

Matrix gate_log_probs(const Matrix& gate_design, const Matrix& alpha) {
  Matrix eta = gate_design * alpha.transpose();
  for (Index i = 0; i < eta.rows(); ++i) {
    const double m = eta.row(i).maxCoeff();
    const double lse = m + std::log((eta.row(i).array() - m).exp().sum());
    eta.row(i).array() -= lse;
  }
  return eta;
}

double gaussian_logpdf(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& mean,
                       const Eigen::Ref<const Matrix>& cov, double floor) {
  const Index r = y.size();
  if (r == 0) return 0.0;
  if (r == 1) {
    double v = cov(0, 0);
    if (!(v > 0.0)) {
      if (floor <= 0.0) throw NumericalError("degenerate covariance");
      v += floor;
      if (!(v > 0.0)) throw NumericalError("degenerate covariance");
    }
    const double d = y(0) - mean(0);
    return -0.5 * (kLog2Pi + std::log(v) + d * d / v);
  }
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    if (floor <= 0.0) throw NumericalError("degenerate covariance");
    llt.compute(cov + floor * Matrix::Identity(r, r));
    if (llt.info() != Eigen::Success) throw NumericalError("degenerate covariance");
  }
  const Vector z = llt.matrixL().solve(y - mean);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(r) * kLog2Pi + logdet + z.squaredNorm());
}

ConditionalGaussian conditional_gaussian(const GaussianBlock& block, const Vector& y_obs,
                                         double floor) {
  const auto& o = block.obs_idx;
  const auto& m = block.mis_idx;
  if (o.size() + m.size() != static_cast<std::size_t>(block.mean.size()) ||
      static_cast<Index>(o.size()) != y_obs.size()) {
    throw DataError("invalid observed/missing partition");
  }
  if (o.empty()) return {block.mean, block.cov};
  const Matrix s_oo = select(block.cov, o, o);
  const Matrix s_mo = select(block.cov, m, o);
  const Matrix s_mm = select(block.cov, m, m);
  Eigen::LLT<Matrix> llt(s_oo);
  if (llt.info() != Eigen::Success) {
    if (floor > 0.0) {
      llt.compute(s_oo + floor * Matrix::Identity(s_oo.rows(), s_oo.cols()));
    }
    if (floor <= 0.0 || llt.info() != Eigen::Success) {
      throw NumericalError("degenerate observed block");
    }
  }
  const Vector resid = y_obs - select(block.mean, o);
  ConditionalGaussian out;
  out.mean = select(block.mean, m) + s_mo * llt.solve(resid);
  out.cov = s_mm - s_mo * llt.solve(s_mo.transpose());
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

Vector component_mean(const DesignSpec& design, const Eigen::Ref<const Vector>& x_row,
                      const Matrix& B) {
  if (B.rows() != design.mean_dim()) {
    throw DataError("coefficient matrix has " + std::to_string(B.rows()) + " rows, design needs " +
                    std::to_string(design.mean_dim()));
  }
  for (Index c : design.mean_covariates) {
    if (c >= x_row.size()) throw DataError("covariate row too short for mean design");
  }
  return B.transpose() * design.mean_row(x_row);
}

double covariance_floor(const Dataset& data) {
  double largest = 0.0;
  for (Index j = 0; j < data.p(); ++j) {
    double sum = 0.0, sq = 0.0;
    Index count = 0;
    for (Index i = 0; i < data.n(); ++i) {
      if (!data.delta(i, j)) continue;
      sum += data.y(i, j);
      sq += data.y(i, j) * data.y(i, j);
      ++count;
    }
    if (count > 1) {
      const double mean = sum / static_cast<double>(count);
      largest = std::max(largest, sq / static_cast<double>(count) - mean * mean);
    }
  }
  return 1e-8 * (largest > 0.0 ? largest : 1.0);
}

Matrix floor_covariance(const Matrix& cov, double floor) {
  if (cov.rows() == 1) {
    Matrix out = cov;
    out(0, 0) = std::max(out(0, 0), floor);
    return out;
  }
  const Matrix sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.eigenvalues().minCoeff() >= floor) return sym;
  const Vector clamped = eig.eigenvalues().cwiseMax(floor);
  Matrix out = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

Matrix select(const Matrix& m, const IndexList& rows, const IndexList& cols) {
  Matrix out(rows.size(), cols.size());
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t b = 0; b < cols.size(); ++b) out(a, b) = m(rows[a], cols[b]);
  }
  return out;
}

Vector select(const Vector& v, const IndexList& idx) {
  Vector out(idx.size());
  for (std::size_t a = 0; a < idx.size(); ++a) out(a) = v(idx[a]);
  return out;
}

}  // namespace cgmm

namespace cgmm {

double mixture_logpdf(const CgmmParams& params, const Eigen::Ref<const Vector>& x_row,
                      const Eigen::Ref<const Vector>& y_row) {
  const Vector gate = gate_probs(params.design.gate_row(x_row), params.alpha);
  const Vector z = params.design.mean_row(x_row);
  Vector terms(params.G());
  for (Index g = 0; g < params.G(); ++g) {
    const auto gi = static_cast<std::size_t>(g);
    terms(g) = std::log(gate(g)) +
               gaussian_logpdf(y_row, params.B[gi].transpose() * z, params.Sigma[gi], 1e-300);
  }
  const double m = terms.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((terms.array() - m).exp().sum());
}

}  // namespace cgmm

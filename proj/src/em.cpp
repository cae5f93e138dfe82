#include "cgmm/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "cgmm/errors.hpp"
#include "cgmm/parallel.hpp"

namespace cgmm {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kCollapseMass = 1e-6;
constexpr int kAttemptsPerStart = 3;

// Thrown inside a run when a component loses all responsibility mass.
struct Collapse {
  int component;
};

struct RunResult {
  CgmmParams params;
  std::vector<double> trace;
  bool converged = false;
  int n_iter = 0;
  std::vector<std::string> warnings;
};

// Gate log-likelihood sum_i [pi_i' eta_i - logsumexp(eta_i)]; fills the
// softmax probabilities when `prob` is given.
double gate_objective(const Matrix& gate_x, const Matrix& pi, const Matrix& alpha,
                      Matrix* prob = nullptr) {
  const Matrix eta = gate_x * alpha.transpose();
  const Index G = eta.cols();
  if (prob) prob->resize(eta.rows(), G);
  double total = 0.0;
  for (Index i = 0; i < eta.rows(); ++i) {
    const double m = eta.row(i).maxCoeff();
    double sum = 0.0;
    for (Index g = 0; g < G; ++g) {
      const double e = std::exp(eta(i, g) - m);
      sum += e;
      if (prob) (*prob)(i, g) = e;
    }
    if (prob) prob->row(i) /= sum;
    total += pi.row(i).dot(eta.row(i)) - m - std::log(sum);
  }
  return total;
}

// Starting expert parameters for the first M-step: a pooled regression on
// column-mean-completed y. Only used to fill partially observed rows.
CgmmParams pooled_start(const detail::FitContext& ctx, int G) {
  const Dataset& d = ctx.data;
  Matrix filled = d.y;
  for (Index j = 0; j < d.p(); ++j) {
    double sum = 0.0;
    Index count = 0;
    for (Index i = 0; i < d.n(); ++i) {
      if (d.delta(i, j)) {
        sum += d.y(i, j);
        ++count;
      }
    }
    const double mean = count > 0 ? sum / static_cast<double>(count) : 0.0;
    for (Index i = 0; i < d.n(); ++i) {
      if (!d.delta(i, j)) filled(i, j) = mean;
    }
  }
  Matrix gram = ctx.mean_x.transpose() * ctx.mean_x;
  gram.diagonal().array() += 1e-8;
  const Matrix b = gram.ldlt().solve(ctx.mean_x.transpose() * filled);
  const Matrix resid = filled - ctx.mean_x * b;
  Matrix sigma = resid.transpose() * resid / static_cast<double>(std::max<Index>(d.n(), 1));
  sigma = floor_covariance(sigma, std::max(ctx.cov_floor, 1e-6 * sigma.diagonal().maxCoeff()));

  CgmmParams params;
  params.design = ctx.design;
  params.alpha = Matrix::Zero(G, ctx.gate_x.cols());
  params.B.assign(G, b);
  params.Sigma.assign(G, sigma);
  return params;
}

RunResult run_em(const detail::FitContext& ctx, CgmmParams params, const FitConfig& cfg) {
  RunResult run;
  const Index n = ctx.data.n();
  Matrix pi;
  for (int iter = 0;; ++iter) {
    const Matrix terms = detail::joint_log_terms(ctx, params);
    const double ll = detail::normalize_terms(terms, pi);
    if (!std::isfinite(ll)) throw NumericalError("observed log-likelihood is not finite");
    run.trace.push_back(ll);
    if (run.trace.size() > 1) {
      const double prev = run.trace[run.trace.size() - 2];
      if (std::abs(ll - prev) / (std::abs(ll) + 1.0) < cfg.tol) {
        run.converged = true;
        break;
      }
    }
    if (iter >= cfg.max_iter) break;

    const Vector mass = pi.colwise().sum();
    for (Index g = 0; g < mass.size(); ++g) {
      if (mass(g) < kCollapseMass * static_cast<double>(n)) throw Collapse{static_cast<int>(g)};
    }

    const GateUpdate gate = detail::gate_newton(ctx.gate_x, pi, params.alpha, GateOptions{});
    ExpertUpdate experts = detail::update_experts(ctx, pi, params);
    if (gate.separation && run.warnings.empty()) {
      run.warnings.push_back("gate separation: coefficients capped");
    }
    for (auto& w : experts.warnings) {
      if (std::find(run.warnings.begin(), run.warnings.end(), w) == run.warnings.end()) {
        run.warnings.push_back(std::move(w));
      }
    }
    params.alpha = gate.alpha;
    params.B = std::move(experts.B);
    params.Sigma = std::move(experts.Sigma);
    run.n_iter = iter + 1;
  }
  run.params = std::move(params);
  return run;
}

CgmmParams params_from_responsibilities(const detail::FitContext& ctx, const Matrix& pi) {
  const auto G = static_cast<int>(pi.cols());
  CgmmParams start = pooled_start(ctx, G);
  const GateUpdate gate =
      detail::gate_newton(ctx.gate_x, pi, Matrix::Zero(G, ctx.gate_x.cols()), GateOptions{});
  ExpertUpdate experts = detail::update_experts(ctx, pi, start);
  start.alpha = gate.alpha;
  start.B = std::move(experts.B);
  start.Sigma = std::move(experts.Sigma);
  return start;
}

}  // namespace

void FitConfig::validate() const {
  if (G < 1) throw UsageError("G must be at least 1");
  if (max_iter < 1) throw UsageError("max_iter must be at least 1");
  if (!(tol > 0.0)) throw UsageError("tol must be positive");
  if (n_starts < 1) throw UsageError("n_starts must be at least 1");
}

namespace detail {

FitContext::FitContext(const Dataset& d, const DesignSpec& des)
    : data(d),
      design(des),
      gate_x(des.gate_design(d.x)),
      mean_x(des.mean_design(d.x)),
      cov_floor(covariance_floor(d)),
      scalar_y(d.p() == 1) {
  design.validate(d.q());
  std::map<std::vector<bool>, std::size_t> index;
  for (Index i = 0; i < d.n(); ++i) {
    std::vector<bool> key(static_cast<std::size_t>(d.p()));
    for (Index j = 0; j < d.p(); ++j) key[static_cast<std::size_t>(j)] = d.delta(i, j);
    auto [it, inserted] = index.try_emplace(key, patterns.size());
    if (inserted) patterns.push_back({d.observed(i), d.missing(i), {}});
    patterns[it->second].rows.push_back(i);
  }
}

Matrix joint_log_terms(const FitContext& ctx, const CgmmParams& params) {
  const Dataset& d = ctx.data;
  Matrix terms = gate_log_probs(ctx.gate_x, params.alpha);
  const Index G = params.G();
  for (Index g = 0; g < G; ++g) {
    const Matrix mu = ctx.mean_x * params.B[static_cast<std::size_t>(g)];
    const Matrix& sigma = params.Sigma[static_cast<std::size_t>(g)];
    if (ctx.scalar_y) {
      double v = sigma(0, 0);
      if (!(v > 0.0)) v += ctx.cov_floor;
      if (!(v > 0.0)) throw NumericalError("degenerate covariance");
      const double c = -0.5 * (kLog2Pi + std::log(v));
      for (Index i = 0; i < d.n(); ++i) {
        if (!d.delta(i, 0)) continue;
        const double r = d.y(i, 0) - mu(i, 0);
        terms(i, g) += c - 0.5 * r * r / v;
      }
    } else {
      for (const auto& pat : ctx.patterns) {
        if (pat.obs.empty()) continue;
        const auto r = static_cast<Index>(pat.obs.size());
        const Matrix s_oo = select(sigma, pat.obs, pat.obs);
        Eigen::LLT<Matrix> llt(s_oo);
        if (llt.info() != Eigen::Success) {
          llt.compute(s_oo + ctx.cov_floor * Matrix::Identity(r, r));
          if (llt.info() != Eigen::Success) throw NumericalError("degenerate covariance");
        }
        const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        const double c = -0.5 * (static_cast<double>(r) * kLog2Pi + logdet);
        Vector resid(r);
        for (Index i : pat.rows) {
          for (Index k = 0; k < r; ++k) {
            const Index j = pat.obs[static_cast<std::size_t>(k)];
            resid(k) = d.y(i, j) - mu(i, j);
          }
          llt.matrixL().solveInPlace(resid);
          terms(i, g) += c - 0.5 * resid.squaredNorm();
        }
      }
    }
  }
  for (Index i = 0; i < terms.rows(); ++i) {
    for (Index g = 0; g < G; ++g) {
      if (std::isnan(terms(i, g)) || terms(i, g) == std::numeric_limits<double>::infinity()) {
        throw NumericalError("degenerate component " + std::to_string(g + 1) + " at row " +
                             std::to_string(i + 1));
      }
    }
  }
  return terms;
}

double normalize_terms(const Matrix& terms, Matrix& pi) {
  pi.resize(terms.rows(), terms.cols());
  double ll = 0.0;
  for (Index i = 0; i < terms.rows(); ++i) {
    const double m = terms.row(i).maxCoeff();
    if (!std::isfinite(m)) {
      throw NumericalError("degenerate components at row " + std::to_string(i + 1));
    }
    pi.row(i) = (terms.row(i).array() - m).exp();
    const double s = pi.row(i).sum();
    pi.row(i) /= s;
    ll += m + std::log(s);
  }
  return ll;
}

GateUpdate gate_newton(const Matrix& gate_x, const Matrix& pi, const Matrix& alpha_init,
                       const GateOptions& options) {
  GateUpdate out;
  out.alpha = alpha_init;
  out.alpha.row(0).setZero();
  const Index G = pi.cols();
  const Index d = gate_x.cols();
  const Index n = gate_x.rows();
  if (G == 1) {
    out.converged = true;
    return out;
  }
  const Index K = G - 1;
  const Index dim = K * d;
  const double grad_tol = options.grad_tol_per_row * static_cast<double>(n);
  Matrix prob;
  double current = gate_objective(gate_x, pi, out.alpha, &prob);
  Matrix hess(dim, dim);
  Matrix weighted(n, K * (K + 1) / 2 * d);
  Matrix trial_prob;

  for (int it = 0; it < options.max_iter; ++it) {
    const Matrix grad_m = gate_x.transpose() * (pi.rightCols(K) - prob.rightCols(K));
    const Vector grad = Eigen::Map<const Vector>(grad_m.data(), dim);
    out.grad_norm = grad.norm();
    out.iterations = it;
    if (out.grad_norm <= grad_tol) {
      out.converged = true;
      break;
    }
    // Block (k, l) of the Hessian is X' diag(w_kl) X with
    // w_kl = p_k (1{k=l} - p_l); all blocks come from one product.
    Index pair = 0;
    for (Index k = 0; k < K; ++k) {
      for (Index l = k; l < K; ++l, ++pair) {
        const auto pk = prob.col(k + 1).array();
        const Vector w = k == l ? Vector(pk * (1.0 - pk)) : Vector(-(pk * prob.col(l + 1).array()));
        weighted.middleCols(pair * d, d) = gate_x.array().colwise() * w.array();
      }
    }
    const Matrix blocks = gate_x.transpose() * weighted;
    pair = 0;
    for (Index k = 0; k < K; ++k) {
      for (Index l = k; l < K; ++l, ++pair) {
        hess.block(k * d, l * d, d, d) = blocks.middleCols(pair * d, d);
        if (k != l) hess.block(l * d, k * d, d, d) = blocks.middleCols(pair * d, d).transpose();
      }
    }
    Eigen::LDLT<Matrix> ldlt(hess);
    const double scale = std::max(hess.diagonal().cwiseAbs().maxCoeff(), 1e-12);
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 1e-12 * scale) {
      hess.diagonal().array() += 1e-8 * scale;
      ldlt.compute(hess);
    }
    const Vector step = ldlt.solve(grad);
    if (!step.allFinite()) break;

    bool accepted = false;
    double t = 1.0;
    for (int h = 0; h <= options.max_halvings; ++h, t *= 0.5) {
      Matrix trial = out.alpha;
      bool clamped = false;
      for (Index k = 0; k < K; ++k) {
        for (Index c = 0; c < d; ++c) {
          double v = out.alpha(k + 1, c) + t * step(k * d + c);
          if (std::abs(v) > options.coef_cap) {
            v = std::copysign(options.coef_cap, v);
            clamped = true;
          }
          trial(k + 1, c) = v;
        }
      }
      const double value = gate_objective(gate_x, pi, trial, &trial_prob);
      if (value >= current) {
        const bool moved = (trial - out.alpha).cwiseAbs().maxCoeff() > 0.0;
        out.alpha = std::move(trial);
        prob.swap(trial_prob);
        current = value;
        accepted = moved;
        out.separation = out.separation || clamped;
        break;
      }
    }
    if (!accepted) break;
    out.iterations = it + 1;
  }
  if (out.alpha.cwiseAbs().maxCoeff() >= options.coef_cap) out.separation = true;
  return out;
}

ExpertUpdate update_experts(const FitContext& ctx, const Matrix& pi, const CgmmParams& current) {
  const Dataset& d = ctx.data;
  const Index G = pi.cols();
  const Index p = d.p();
  const Index dm = ctx.mean_x.cols();
  ExpertUpdate out;
  out.B.resize(static_cast<std::size_t>(G));
  out.Sigma.resize(static_cast<std::size_t>(G));

  for (Index g = 0; g < G; ++g) {
    const auto gi = static_cast<std::size_t>(g);
    // Completed responses and the summed conditional-covariance correction.
    Matrix yhat = d.y;
    Matrix correction = Matrix::Zero(p, p);
    Vector w = Vector::Zero(d.n());
    if (ctx.scalar_y) {
      for (Index i = 0; i < d.n(); ++i) {
        if (d.delta(i, 0)) w(i) = pi(i, g);
      }
    } else {
      const Matrix mu = ctx.mean_x * current.B[gi];
      const Matrix& sigma = current.Sigma[gi];
      for (const auto& pat : ctx.patterns) {
        if (pat.obs.empty()) continue;
        double pattern_mass = 0.0;
        for (Index i : pat.rows) {
          w(i) = pi(i, g);
          pattern_mass += w(i);
        }
        if (pat.mis.empty()) continue;
        // Regression of missing on observed coordinates is shared by the pattern.
        const Matrix s_oo = select(sigma, pat.obs, pat.obs);
        const Matrix s_mo = select(sigma, pat.mis, pat.obs);
        Eigen::LLT<Matrix> llt(s_oo);
        if (llt.info() != Eigen::Success) {
          llt.compute(s_oo + ctx.cov_floor *
                                 Matrix::Identity(s_oo.rows(), s_oo.cols()));
          if (llt.info() != Eigen::Success) throw NumericalError("degenerate observed block");
        }
        const Matrix gain = llt.solve(s_mo.transpose()).transpose();
        const Matrix schur = select(sigma, pat.mis, pat.mis) - gain * s_mo.transpose();
        for (std::size_t a = 0; a < pat.mis.size(); ++a) {
          for (std::size_t b = 0; b < pat.mis.size(); ++b) {
            correction(pat.mis[a], pat.mis[b]) += pattern_mass * schur(a, b);
          }
        }
        Vector resid(static_cast<Index>(pat.obs.size()));
        for (Index i : pat.rows) {
          for (std::size_t k = 0; k < pat.obs.size(); ++k) {
            resid(static_cast<Index>(k)) = d.y(i, pat.obs[k]) - mu(i, pat.obs[k]);
          }
          const Vector fill = gain * resid;
          for (std::size_t k = 0; k < pat.mis.size(); ++k) {
            yhat(i, pat.mis[k]) = mu(i, pat.mis[k]) + fill(static_cast<Index>(k));
          }
        }
      }
    }
    for (Index i = 0; i < d.n(); ++i) {
      if (w(i) == 0.0) yhat.row(i).setZero();
    }
    const double mass = w.sum();
    if (!(mass > 0.0)) {
      out.B[gi] = current.B[gi];
      out.Sigma[gi] = current.Sigma[gi];
      out.warnings.push_back("component " + std::to_string(g + 1) + " has no observed mass");
      continue;
    }
    const Matrix wx = ctx.mean_x.array().colwise() * w.array();
    Matrix gram = ctx.mean_x.transpose() * wx;
    const Matrix rhs = wx.transpose() * yhat;
    Eigen::LDLT<Matrix> ldlt(gram);
    const double scale = std::max(gram.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 1e-12 * scale) {
      gram += 1e-8 * Matrix::Identity(dm, dm);
      ldlt.compute(gram);
      out.warnings.push_back("rank-deficient weighted design: ridge added");
    }
    out.B[gi] = ldlt.solve(rhs);
    const Matrix resid = yhat - ctx.mean_x * out.B[gi];
    const Matrix wr = resid.array().colwise() * w.array();
    Matrix sigma = (resid.transpose() * wr + correction) / mass;
    out.Sigma[gi] = floor_covariance(sigma, ctx.cov_floor);
  }
  return out;
}

std::vector<int> kmeans(const Matrix& points, int k, std::mt19937_64& rng, int max_iter) {
  const Index n = points.rows();
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  if (k <= 1 || n == 0) return labels;
  Matrix centers(k, points.cols());
  std::uniform_int_distribution<Index> pick(0, n - 1);
  centers.row(0) = points.row(pick(rng));
  Vector dist2(n);
  for (Index i = 0; i < n; ++i) dist2(i) = (points.row(i) - centers.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = dist2.sum();
    Index chosen = pick(rng);
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      for (Index i = 0; i < n; ++i) {
        target -= dist2(i);
        if (target <= 0.0) {
          chosen = i;
          break;
        }
      }
    }
    centers.row(c) = points.row(chosen);
    for (Index i = 0; i < n; ++i) {
      dist2(i) = std::min(dist2(i), (points.row(i) - centers.row(c)).squaredNorm());
    }
  }
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double dd = (points.row(i) - centers.row(c)).squaredNorm();
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      dist2(i) = best_d;
      if (labels[static_cast<std::size_t>(i)] != best || it == 0) {
        changed = changed || labels[static_cast<std::size_t>(i)] != best;
        labels[static_cast<std::size_t>(i)] = best;
      }
    }
    Matrix sums = Matrix::Zero(k, points.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
      sums.row(labels[static_cast<std::size_t>(i)]) += points.row(i);
      ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      } else {
        // Empty cluster: move it onto the point farthest from its center.
        Index far = 0;
        dist2.maxCoeff(&far);
        centers.row(c) = points.row(far);
        dist2(far) = 0.0;
        changed = true;
      }
    }
    if (!changed && it > 0) break;
  }
  return labels;
}

Matrix initial_responsibilities(const Dataset& data, int G, InitMethod method,
                                std::mt19937_64& rng) {
  const Index n = data.n();
  if (G == 1) return Matrix::Ones(n, 1);
  std::gamma_distribution<double> gamma(1.0, 1.0);
  auto dirichlet_row = [&](Index cols) {
    Vector r(cols);
    for (Index g = 0; g < cols; ++g) r(g) = gamma(rng);
    return Vector(r / r.sum());
  };
  Matrix resp(n, G);
  if (method == InitMethod::random_responsibility) {
    for (Index i = 0; i < n; ++i) resp.row(i) = dirichlet_row(G).transpose();
    return resp;
  }
  // k-means on standardized covariates and column-mean-completed responses.
  Matrix features(n, data.q() + data.p());
  features.leftCols(data.q()) = data.x;
  for (Index j = 0; j < data.p(); ++j) {
    double sum = 0.0;
    Index count = 0;
    for (Index i = 0; i < n; ++i) {
      if (data.delta(i, j)) {
        sum += data.y(i, j);
        ++count;
      }
    }
    const double mean = count > 0 ? sum / static_cast<double>(count) : 0.0;
    for (Index i = 0; i < n; ++i) {
      features(i, data.q() + j) = data.delta(i, j) ? data.y(i, j) : mean;
    }
  }
  for (Index c = 0; c < features.cols(); ++c) {
    const double mean = features.col(c).mean();
    features.col(c).array() -= mean;
    const double sd = std::sqrt(features.col(c).squaredNorm() / static_cast<double>(n));
    if (sd > 0.0) features.col(c) /= sd;
  }
  const std::vector<int> labels = kmeans(features, G, rng);
  constexpr double kJitter = 0.1;
  for (Index i = 0; i < n; ++i) {
    resp.row(i) = kJitter * dirichlet_row(G).transpose();
    resp(i, labels[static_cast<std::size_t>(i)]) += 1.0 - kJitter;
  }
  return resp;
}

}  // namespace detail

Responsibilities e_step(const Dataset& data, const CgmmParams& params) {
  params.validate();
  const detail::FitContext ctx(data, params.design);
  Responsibilities out;
  detail::normalize_terms(detail::joint_log_terms(ctx, params), out.pi);
  return out;
}

GateUpdate m_step_gate(const Dataset& data, const DesignSpec& design, const Responsibilities& pi,
                       const Matrix& alpha_init, const GateOptions& options) {
  design.validate(data.q());
  if (pi.pi.rows() != data.n() || alpha_init.rows() != pi.pi.cols() ||
      alpha_init.cols() != design.gate_dim()) {
    throw DataError("gate update dimensions disagree");
  }
  return detail::gate_newton(design.gate_design(data.x), pi.pi, alpha_init, options);
}

ExpertUpdate m_step_experts(const Dataset& data, const Responsibilities& pi,
                            const CgmmParams& current) {
  current.validate();
  const detail::FitContext ctx(data, current.design);
  return detail::update_experts(ctx, pi.pi, current);
}

double observed_loglik(const Dataset& data, const CgmmParams& params) {
  params.validate();
  const detail::FitContext ctx(data, params.design);
  Matrix pi;
  return detail::normalize_terms(detail::joint_log_terms(ctx, params), pi);
}

Index bic_dof(Index G, Index gate_dim, Index mean_dim, Index p) {
  return (G - 1) * gate_dim + G * (mean_dim * p + p * (p + 1) / 2);
}

double bic(const FitReport& report, Index n) {
  const auto& params = report.params;
  const Index dof =
      bic_dof(params.G(), params.design.gate_dim(), params.design.mean_dim(), params.p());
  return -2.0 * report.loglik() + static_cast<double>(dof) * std::log(static_cast<double>(n));
}

CgmmParams canonicalize(const CgmmParams& params) {
  const Index G = params.G();
  const bool slope_first = params.design.mean_intercept && params.design.mean_dim() > 1;
  auto key = [&](Index g) {
    const Matrix& b = params.B[static_cast<std::size_t>(g)];
    std::vector<double> k;
    k.reserve(static_cast<std::size_t>(b.size()) + 1);
    if (slope_first) k.push_back(b(1, 0));
    for (Index c = 0; c < b.cols(); ++c) {
      for (Index r = 0; r < b.rows(); ++r) k.push_back(b(r, c));
    }
    return k;
  };
  std::vector<Index> order(static_cast<std::size_t>(G));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return key(a) > key(b); });

  CgmmParams out;
  out.design = params.design;
  out.alpha.resize(G, params.alpha.cols());
  for (Index k = 0; k < G; ++k) {
    const auto src = static_cast<std::size_t>(order[static_cast<std::size_t>(k)]);
    out.alpha.row(k) = params.alpha.row(order[static_cast<std::size_t>(k)]) -
                       params.alpha.row(order[0]);
    out.B.push_back(params.B[src]);
    out.Sigma.push_back(params.Sigma[src]);
  }
  out.alpha.row(0).setZero();
  return out;
}

namespace {

void require_observed_columns(const Dataset& data) {
  for (Index j = 0; j < data.p(); ++j) {
    if (!data.delta.col(j).any()) {
      throw DataError("response column " + std::to_string(j + 1) + " has no observed values");
    }
  }
}

}  // namespace

FitReport fit_em(const Dataset& data, const DesignSpec& design, const FitConfig& cfg) {
  cfg.validate();
  data.validate();
  require_observed_columns(data);
  const detail::FitContext ctx(data, design);

  struct StartOutcome {
    std::optional<RunResult> run;
    std::string error;
  };
  std::vector<StartOutcome> outcomes(static_cast<std::size_t>(cfg.n_starts));
  parallel_for(outcomes.size(), cfg.threads, [&](std::size_t s) {
    for (int attempt = 0; attempt < kAttemptsPerStart; ++attempt) {
      std::mt19937_64 rng(derive_seed(cfg.seed, s, static_cast<std::uint64_t>(attempt)));
      try {
        const Matrix resp = detail::initial_responsibilities(data, cfg.G, cfg.init, rng);
        outcomes[s].run = run_em(ctx, params_from_responsibilities(ctx, resp), cfg);
        return;
      } catch (const Collapse& c) {
        outcomes[s].error = "component " + std::to_string(c.component + 1) + " collapsed";
      } catch (const NumericalError& e) {
        outcomes[s].error = e.what();
      }
    }
  });

  int best = -1;
  for (std::size_t s = 0; s < outcomes.size(); ++s) {
    if (!outcomes[s].run) continue;
    if (best < 0 || outcomes[s].run->trace.back() >
                        outcomes[static_cast<std::size_t>(best)].run->trace.back()) {
      best = static_cast<int>(s);
    }
  }
  if (best < 0) {
    throw NumericalError("fit failed: all starts degenerate (" + outcomes.front().error + ")");
  }
  RunResult& run = *outcomes[static_cast<std::size_t>(best)].run;
  FitReport report;
  report.params = canonicalize(run.params);
  report.loglik_trace = std::move(run.trace);
  report.converged = run.converged;
  report.n_iter = run.n_iter;
  report.best_start = best;
  report.warnings = std::move(run.warnings);
  report.bic = bic(report, data.n());
  return report;
}

FitReport fit_em_from(const Dataset& data, const CgmmParams& init, const FitConfig& cfg) {
  cfg.validate();
  data.validate();
  init.validate();
  require_observed_columns(data);
  const detail::FitContext ctx(data, init.design);
  try {
    RunResult run = run_em(ctx, init, cfg);
    FitReport report;
    report.params = canonicalize(run.params);
    report.loglik_trace = std::move(run.trace);
    report.converged = run.converged;
    report.n_iter = run.n_iter;
    report.warnings = std::move(run.warnings);
    report.bic = bic(report, data.n());
    return report;
  } catch (const Collapse& c) {
    throw NumericalError("component " + std::to_string(c.component + 1) + " collapsed");
  }
}

const FitReport& Selection::best() const {
  for (const auto& f : fits) {
    if (f.G == best_g && f.report) return *f.report;
  }
  throw NumericalError("selection has no successful fit");
}

Selection select_g(const Dataset& data, const DesignSpec& design, const FitConfig& cfg,
                   const std::vector<int>& g_range) {
  if (g_range.empty()) throw UsageError("G range is empty");
  Selection sel;
  double best_bic = std::numeric_limits<double>::infinity();
  for (int G : g_range) {
    FitConfig c = cfg;
    c.G = G;
    GFit fit{G, std::nullopt, {}};
    try {
      fit.report = fit_em(data, design, c);
      const double b = fit.report->bic;
      if (b < best_bic || (b == best_bic && G < sel.best_g)) {
        best_bic = b;
        sel.best_g = G;
      }
    } catch (const NumericalError& e) {
      fit.error = e.what();
    }
    sel.fits.push_back(std::move(fit));
  }
  if (sel.best_g == 0) {
    throw NumericalError("fit failed for every G in range (G=" + std::to_string(sel.fits.front().G) +
                         ": " + sel.fits.front().error + ")");
  }
  return sel;
}

}  // namespace cgmm

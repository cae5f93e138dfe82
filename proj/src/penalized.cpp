#include "cgmm/penalized.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "cgmm/errors.hpp"
#include "cgmm/parallel.hpp"

namespace cgmm {

namespace {

constexpr double kOmegaFloor = 1e-5;
constexpr double kVarianceFloor = 1e-10;
constexpr double kCollapseMass = 1e-6;

struct Standardizer {
  Vector mean;
  Vector sd;

  Matrix apply(const Matrix& x) const {
    Matrix out = x.rowwise() - mean.transpose();
    return out.array().rowwise() / sd.transpose().array();
  }

  // Maps a coefficient vector (intercept first) back to the raw covariate scale.
  Vector unscale(const Vector& coef) const {
    Vector out(coef.size());
    out.tail(coef.size() - 1) = coef.tail(coef.size() - 1).cwiseQuotient(sd);
    out(0) = coef(0) - out.tail(coef.size() - 1).dot(mean);
    return out;
  }

  Vector scale(const Vector& coef) const {
    Vector out(coef.size());
    out.tail(coef.size() - 1) = coef.tail(coef.size() - 1).cwiseProduct(sd);
    out(0) = coef(0) + coef.tail(coef.size() - 1).dot(mean);
    return out;
  }
};

Standardizer fit_standardizer(const Dataset& data) {
  const Index q = data.q();
  Standardizer s{Vector::Zero(q), Vector::Ones(q)};
  Index count = 0;
  for (Index i = 0; i < data.n(); ++i) {
    if (!data.delta(i, 0)) continue;
    s.mean += data.x.row(i).transpose();
    ++count;
  }
  if (count == 0) throw DataError("no respondents to standardize covariates");
  s.mean /= static_cast<double>(count);
  Vector sq = Vector::Zero(q);
  for (Index i = 0; i < data.n(); ++i) {
    if (!data.delta(i, 0)) continue;
    sq += (data.x.row(i).transpose() - s.mean).cwiseAbs2();
  }
  for (Index j = 0; j < q; ++j) {
    const double sd = std::sqrt(sq(j) / static_cast<double>(count));
    s.sd(j) = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

double slope_l1(const PenalizedParams& p) {
  double total = 0.0;
  for (Index g = 1; g < p.G(); ++g) {
    total += p.alpha.row(g).tail(p.alpha.cols() - 1).cwiseAbs().sum();
  }
  total += p.beta.bottomRows(p.beta.rows() - 1).cwiseAbs().sum();
  return total;
}

Index slope_nonzero(const PenalizedParams& p) {
  Index nz = 0;
  for (Index g = 1; g < p.G(); ++g) {
    nz += (p.alpha.row(g).tail(p.alpha.cols() - 1).array() != 0.0).count();
  }
  nz += (p.beta.bottomRows(p.beta.rows() - 1).array() != 0.0).count();
  return nz;
}

struct Problem {
  Dataset scaled;
  Standardizer standardizer;
  Vector y;      // missing entries replaced by 0
  Vector obs;    // 1 for respondents
  double var_floor;
};

struct PenRun {
  PenalizedParams params;
  std::vector<double> trace;
  double loglik = 0.0;
  bool converged = false;
  int n_iter = 0;
  std::vector<std::string> warnings;
};

struct Collapse {};

void m_step(const Problem& prob, const Matrix& pi, double lambda, const PenaltyConfig& pen,
            PenalizedParams& params, std::vector<std::string>& warnings) {
  const CdOptions cd{pen.inner_cd_iter, pen.cd_tol};
  if (params.G() > 1) {
    GateQuadraticUpdate gate = gate_partial_quadratic(prob.scaled.x, pi, params.alpha, lambda, cd);
    params.alpha = std::move(gate.alpha);
    for (auto& w : gate.warnings) {
      if (std::find(warnings.begin(), warnings.end(), w) == warnings.end()) {
        warnings.push_back(std::move(w));
      }
    }
  }
  for (Index g = 0; g < params.G(); ++g) {
    const Vector w = pi.col(g).cwiseProduct(prob.obs);
    params.beta.col(g) = cd_update_beta(prob.scaled.x, prob.y, w, params.beta.col(g), lambda, cd);
    const Vector resid =
        prob.y - prob.scaled.x * params.beta.col(g).tail(params.beta.rows() - 1) -
        Vector::Constant(prob.y.size(), params.beta(0, g));
    const double mass = w.sum();
    const double s2 = mass > 0.0 ? w.dot(resid.cwiseAbs2()) / mass : params.sigma2(g);
    params.sigma2(g) = std::max(s2, prob.var_floor);
  }
}

PenRun run_penalized(const Problem& prob, PenalizedParams params, const FitConfig& cfg,
                     const PenaltyConfig& pen, double lambda) {
  const Index q = prob.scaled.q();
  const detail::FitContext ctx(prob.scaled, DesignSpec::full(q));
  PenRun run;
  Matrix pi;
  for (int iter = 0;; ++iter) {
    const Matrix terms = detail::joint_log_terms(ctx, params.to_cgmm(q));
    const double ll = detail::normalize_terms(terms, pi);
    const double obj = ll - lambda * slope_l1(params);
    if (!std::isfinite(obj)) throw NumericalError("penalized objective is not finite");
    run.trace.push_back(obj);
    run.loglik = ll;
    if (run.trace.size() > 1) {
      const double prev = run.trace[run.trace.size() - 2];
      if (std::abs(obj - prev) / (std::abs(obj) + 1.0) < cfg.tol) {
        run.converged = true;
        break;
      }
    }
    if (iter >= cfg.max_iter) break;
    const Vector mass = pi.colwise().sum();
    if (mass.minCoeff() < kCollapseMass * static_cast<double>(prob.scaled.n())) throw Collapse{};
    m_step(prob, pi, lambda, pen, params, run.warnings);
    run.n_iter = iter + 1;
  }
  run.params = std::move(params);
  return run;
}

PenalizedParams start_from(const Problem& prob, const Matrix& resp, double lambda,
                           const PenaltyConfig& pen) {
  const Index G = resp.cols();
  const Index q = prob.scaled.q();
  PenalizedParams params;
  params.alpha = Matrix::Zero(G, q + 1);
  params.beta = Matrix::Zero(q + 1, G);
  params.sigma2 = Vector::Ones(G);
  std::vector<std::string> ignored;
  m_step(prob, resp, lambda, pen, params, ignored);
  return params;
}

Problem make_problem(const Dataset& data) {
  if (data.p() != 1) throw UsageError("penalized fitting needs a scalar response (p = 1)");
  data.validate();
  Problem prob;
  prob.standardizer = fit_standardizer(data);
  prob.scaled = Dataset{prob.standardizer.apply(data.x), data.y, data.delta};
  prob.y = Vector::Zero(data.n());
  prob.obs = Vector::Zero(data.n());
  double sum = 0.0, sq = 0.0;
  Index count = 0;
  for (Index i = 0; i < data.n(); ++i) {
    if (!data.delta(i, 0)) continue;
    prob.y(i) = data.y(i, 0);
    prob.obs(i) = 1.0;
    sum += data.y(i, 0);
    sq += data.y(i, 0) * data.y(i, 0);
    ++count;
  }
  if (count == 0) throw DataError("response column 1 has no observed values");
  const double mean = sum / static_cast<double>(count);
  const double var = sq / static_cast<double>(count) - mean * mean;
  prob.var_floor = kVarianceFloor * (var > 0.0 ? var : 1.0);
  return prob;
}

}  // namespace

double soft_threshold(double z, double gamma) {
  if (gamma < std::abs(z)) return z > 0.0 ? z - gamma : z + gamma;
  return 0.0;
}

std::vector<double> lambda_grid(int count, double hi, double lo) {
  if (count < 1 || !(hi > 0.0) || !(lo > 0.0) || lo > hi) {
    throw UsageError("invalid lambda grid specification");
  }
  std::vector<double> grid(static_cast<std::size_t>(count));
  if (count == 1) {
    grid[0] = hi;
    return grid;
  }
  const double step = (std::log(lo) - std::log(hi)) / static_cast<double>(count - 1);
  for (int k = 0; k < count; ++k) {
    grid[static_cast<std::size_t>(k)] = std::exp(std::log(hi) + step * static_cast<double>(k));
  }
  grid.back() = lo;
  return grid;
}

void PenaltyConfig::validate() const {
  if (lambda_grid.empty()) throw UsageError("lambda grid is empty");
  for (std::size_t k = 0; k < lambda_grid.size(); ++k) {
    if (!(lambda_grid[k] > 0.0)) throw UsageError("lambda grid must be strictly positive");
    if (k > 0 && !(lambda_grid[k] < lambda_grid[k - 1])) {
      throw UsageError("lambda grid must be sorted descending");
    }
  }
  if (cv_folds < 2) throw UsageError("cv_folds must be at least 2");
  if (inner_cd_iter < 1 || !(cd_tol > 0.0)) throw UsageError("invalid coordinate descent limits");
}

CgmmParams PenalizedParams::to_cgmm(Index q) const {
  CgmmParams out;
  out.design = DesignSpec::full(q);
  out.alpha = alpha;
  for (Index g = 0; g < G(); ++g) {
    out.B.emplace_back(beta.col(g));
    out.Sigma.emplace_back(Matrix::Constant(1, 1, sigma2(g)));
  }
  return out;
}

double penalized_ls_objective(const Matrix& x, const Vector& y, const Vector& w,
                              const Vector& beta, double lambda) {
  const Vector r = y - x * beta.tail(beta.size() - 1) - Vector::Constant(y.size(), beta(0));
  return 0.5 * w.dot(r.cwiseAbs2()) + lambda * beta.tail(beta.size() - 1).cwiseAbs().sum();
}

Vector cd_update_beta(const Matrix& x, const Vector& y, const Vector& w, Vector beta,
                      double lambda, const CdOptions& options) {
  const Index q = x.cols();
  if (beta.size() != q + 1 || y.size() != x.rows() || w.size() != x.rows()) {
    throw DataError("coordinate descent dimensions disagree");
  }
  const Matrix wx = x.array().colwise() * w.array();
  const Vector denom = (wx.array() * x.array()).colwise().sum().transpose();
  const double wsum = w.sum();
  Vector r = y - x * beta.tail(q) - Vector::Constant(y.size(), beta(0));
  for (int cycle = 0; cycle < options.max_cycles; ++cycle) {
    double max_change = 0.0;
    if (wsum > 0.0) {
      const double shift = w.dot(r) / wsum;
      beta(0) += shift;
      r.array() -= shift;
      max_change = std::abs(shift);
    }
    for (Index j = 0; j < q; ++j) {
      double updated = 0.0;
      if (denom(j) > 0.0) {
        const double z = wx.col(j).dot(r) + denom(j) * beta(j + 1);
        updated = soft_threshold(z, lambda) / denom(j);
      }
      const double change = updated - beta(j + 1);
      if (change != 0.0) {
        r -= change * x.col(j);
        beta(j + 1) = updated;
        max_change = std::max(max_change, std::abs(change));
      }
    }
    if (max_change < options.tol) break;
  }
  return beta;
}

GateQuadraticUpdate gate_partial_quadratic(const Matrix& x, const Matrix& pi, const Matrix& alpha,
                                           double lambda, const CdOptions& options) {
  GateQuadraticUpdate out{alpha, {}};
  const Index G = pi.cols();
  const Index n = x.rows();
  const Index q = x.cols();
  out.alpha.row(0).setZero();
  for (Index g = 1; g < G; ++g) {
    const Vector coef = out.alpha.row(g).transpose();
    const Vector eta = x * coef.tail(q) + Vector::Constant(n, coef(0));
    Vector omega(n);
    Vector h(n);
    Index informative = 0;
    for (Index i = 0; i < n; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-eta(i)));
      const double v = p * (1.0 - p);
      if (v >= kOmegaFloor) ++informative;
      omega(i) = std::max(v, kOmegaFloor);
      h(i) = eta(i) + (pi(i, g) - p) / omega(i);
    }
    if (informative == 0) {
      out.warnings.push_back("gate weights below floor for component " + std::to_string(g + 1));
      continue;
    }
    out.alpha.row(g) = cd_update_beta(x, h, omega, coef, lambda, options).transpose();
  }
  return out;
}

PenalizedFit fit_penalized_em(const Dataset& data, const FitConfig& cfg, const PenaltyConfig& pen,
                              double lambda, const std::optional<PenalizedParams>& warm) {
  cfg.validate();
  pen.validate();
  if (lambda < 0.0) throw UsageError("lambda must be nonnegative");
  const Problem prob = make_problem(data);
  const Index q = data.q();

  std::optional<PenRun> best;
  std::string last_error = "no start attempted";
  if (warm) {
    if (warm->alpha.cols() != q + 1 || warm->beta.rows() != q + 1) {
      throw UsageError("warm start has wrong dimensions");
    }
    try {
      best = run_penalized(prob, *warm, cfg, pen, lambda);
    } catch (const Collapse&) {
      last_error = "component collapsed";
    } catch (const NumericalError& e) {
      last_error = e.what();
    }
  }
  if (!best) {
    std::vector<std::optional<PenRun>> runs(static_cast<std::size_t>(cfg.n_starts));
    parallel_for(runs.size(), cfg.threads, [&](std::size_t s) {
      for (int attempt = 0; attempt < 3; ++attempt) {
        std::mt19937_64 rng(derive_seed(cfg.seed, s, static_cast<std::uint64_t>(attempt)));
        try {
          const Matrix resp = detail::initial_responsibilities(prob.scaled, cfg.G, cfg.init, rng);
          runs[s] = run_penalized(prob, start_from(prob, resp, lambda, pen), cfg, pen, lambda);
          return;
        } catch (const Collapse&) {
        } catch (const NumericalError&) {
        }
      }
    });
    for (auto& r : runs) {
      if (r && (!best || r->trace.back() > best->trace.back())) best = std::move(r);
    }
  }
  if (!best) throw NumericalError("fit failed: all starts degenerate (" + last_error + ")");

  PenalizedFit fit;
  fit.scaled = best->params;
  fit.params = best->params;
  for (Index g = 0; g < fit.params.G(); ++g) {
    if (g > 0) {
      fit.params.alpha.row(g) =
          prob.standardizer.unscale(best->params.alpha.row(g).transpose()).transpose();
    }
    fit.params.beta.col(g) = prob.standardizer.unscale(best->params.beta.col(g));
  }
  fit.objective = best->trace.back();
  fit.loglik = best->loglik;
  fit.nonzero = slope_nonzero(best->params);
  fit.report.params = fit.params.to_cgmm(q);
  fit.report.loglik_trace = std::move(best->trace);
  fit.report.converged = best->converged;
  fit.report.n_iter = best->n_iter;
  fit.report.warnings = std::move(best->warnings);
  fit.report.bic = penalized_bic(fit, data.n());
  return fit;
}

double penalized_bic(const PenalizedFit& fit, Index n) {
  const Index G = fit.scaled.G();
  const Index dof = (G - 1) + 2 * G + fit.nonzero;
  return -2.0 * fit.loglik + static_cast<double>(dof) * std::log(static_cast<double>(n));
}

Vector predict_mean(const PenalizedParams& params, const Matrix& x) {
  Vector out(x.rows());
  const Index q = x.cols();
  for (Index i = 0; i < x.rows(); ++i) {
    Vector z(q + 1);
    z(0) = 1.0;
    z.tail(q) = x.row(i).transpose();
    const Vector probs = gate_probs(z, params.alpha);
    out(i) = probs.dot(params.beta.transpose() * z);
  }
  return out;
}

CvResult cv_select_lambda(const Dataset& data, const FitConfig& cfg, const PenaltyConfig& pen) {
  pen.validate();
  if (data.p() != 1) throw UsageError("cross-validation needs a scalar response (p = 1)");
  CvResult out;
  IndexList respondents;
  for (Index i = 0; i < data.n(); ++i) {
    if (data.delta(i, 0)) respondents.push_back(i);
  }
  if (respondents.size() < 2) throw DataError("cross-validation needs at least two respondents");
  int folds = pen.cv_folds;
  if (static_cast<std::size_t>(folds) > respondents.size()) {
    folds = static_cast<int>(respondents.size());
    out.warnings.push_back("fewer respondents than folds: using " + std::to_string(folds));
  }
  out.folds = folds;
  out.lambdas = pen.lambda_grid;
  const std::size_t L = out.lambdas.size();

  std::mt19937_64 rng(derive_seed(cfg.seed, 0xcf01d));
  std::shuffle(respondents.begin(), respondents.end(), rng);
  std::vector<int> fold_of(static_cast<std::size_t>(data.n()), -1);
  for (std::size_t k = 0; k < respondents.size(); ++k) {
    fold_of[static_cast<std::size_t>(respondents[k])] = static_cast<int>(k % static_cast<std::size_t>(folds));
  }

  // sse[f][l]: held-out squared error of fold f at lambda l.
  std::vector<std::vector<double>> sse(static_cast<std::size_t>(folds), std::vector<double>(L, 0.0));
  std::vector<Index> held_count(static_cast<std::size_t>(folds), 0);
  FitConfig inner = cfg;
  inner.threads = 1;
  parallel_for(static_cast<std::size_t>(folds), cfg.threads, [&](std::size_t f) {
    IndexList train, held;
    for (Index i = 0; i < data.n(); ++i) {
      (fold_of[static_cast<std::size_t>(i)] == static_cast<int>(f) ? held : train).push_back(i);
    }
    const Dataset train_data = subset_rows(data, train);
    const Dataset held_data = subset_rows(data, held);
    held_count[f] = static_cast<Index>(held.size());
    std::optional<PenalizedParams> warm;
    FitConfig fold_cfg = inner;
    fold_cfg.seed = derive_seed(cfg.seed, 0xf01d, f);
    for (std::size_t l = 0; l < L; ++l) {
      const PenalizedFit fit = fit_penalized_em(train_data, fold_cfg, pen, out.lambdas[l], warm);
      warm = fit.scaled;
      const Vector pred = predict_mean(fit.params, held_data.x);
      sse[f][l] = (pred - held_data.y.col(0)).squaredNorm();
    }
  });

  const double total = static_cast<double>(respondents.size());
  out.cv_error.assign(L, 0.0);
  out.cv_se.assign(L, 0.0);
  for (std::size_t l = 0; l < L; ++l) {
    std::vector<double> fold_mse;
    for (int f = 0; f < folds; ++f) {
      out.cv_error[l] += sse[static_cast<std::size_t>(f)][l];
      fold_mse.push_back(sse[static_cast<std::size_t>(f)][l] /
                         static_cast<double>(held_count[static_cast<std::size_t>(f)]));
    }
    out.cv_error[l] /= total;
    const double m = std::accumulate(fold_mse.begin(), fold_mse.end(), 0.0) / folds;
    double v = 0.0;
    for (double e : fold_mse) v += (e - m) * (e - m);
    out.cv_se[l] = folds > 1 ? std::sqrt(v / (folds - 1) / folds) : 0.0;
  }
  std::size_t best = 0;
  for (std::size_t l = 1; l < L; ++l) {
    if (out.cv_error[l] < out.cv_error[best]) best = l;
  }
  out.best_lambda = out.lambdas[best];
  return out;
}

PenalizedSelection select_g_penalized(const Dataset& data, const FitConfig& cfg,
                                      const PenaltyConfig& pen, const std::vector<int>& g_range) {
  if (g_range.empty()) throw UsageError("G range is empty");
  PenalizedSelection sel;
  double best = std::numeric_limits<double>::infinity();
  std::string first_error;
  for (int G : g_range) {
    FitConfig c = cfg;
    c.G = G;
    try {
      const PenalizedFit fit = fit_penalized_em(data, c, pen, pen.selection_lambda);
      sel.bic.emplace_back(G, fit.report.bic);
      if (fit.report.bic < best) {
        best = fit.report.bic;
        sel.best_g = G;
      }
    } catch (const NumericalError& e) {
      if (first_error.empty()) first_error = "G=" + std::to_string(G) + ": " + e.what();
    }
  }
  if (sel.best_g == 0) {
    throw NumericalError("penalized fit failed for every G in range (" + first_error + ")");
  }
  return sel;
}

}  // namespace cgmm

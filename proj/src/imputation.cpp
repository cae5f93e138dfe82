#include "cgmm/imputation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cgmm/errors.hpp"
#include "cgmm/parallel.hpp"

namespace cgmm {

namespace {

// Every (weight, completed response row) pair entering the fractional sums.
struct Unit {
  Index row;
  double weight;
  Vector y;
};

std::vector<Unit> fractional_units(const Dataset& data, const ImputationResult& result) {
  std::vector<Unit> units;
  units.reserve(static_cast<std::size_t>(data.n()));
  std::vector<const FractionalRecord*> by_row(static_cast<std::size_t>(data.n()), nullptr);
  for (const auto& rec : result.fractional) by_row[static_cast<std::size_t>(rec.row)] = &rec;
  for (Index i = 0; i < data.n(); ++i) {
    const FractionalRecord* rec = by_row[static_cast<std::size_t>(i)];
    if (rec == nullptr) {
      units.push_back({i, 1.0, data.y.row(i).transpose()});
      continue;
    }
    for (Index g = 0; g < rec->weights.size(); ++g) {
      Vector y = data.y.row(i).transpose();
      for (std::size_t k = 0; k < rec->missing.size(); ++k) {
        y(rec->missing[k]) = rec->means(g, static_cast<Index>(k));
      }
      units.push_back({i, rec->weights(g), std::move(y)});
    }
  }
  return units;
}

}  // namespace

ImputationResult impute(const Dataset& data, const CgmmParams& params) {
  data.validate();
  params.validate();
  if (params.p() != data.p()) throw DataError("params and data disagree on p");
  const detail::FitContext ctx(data, params.design);
  Matrix pi;
  detail::normalize_terms(detail::joint_log_terms(ctx, params), pi);

  ImputationResult out;
  out.params_used = params;
  out.y_imputed = data.y;
  const Index G = params.G();
  std::vector<Matrix> mu(static_cast<std::size_t>(G));
  for (Index g = 0; g < G; ++g) mu[static_cast<std::size_t>(g)] = ctx.mean_x * params.B[static_cast<std::size_t>(g)];

  std::vector<FractionalRecord> records(static_cast<std::size_t>(data.n()));
  std::vector<bool> has_record(static_cast<std::size_t>(data.n()), false);
  for (const auto& pat : ctx.patterns) {
    if (pat.mis.empty()) continue;
    const auto m = static_cast<Index>(pat.mis.size());
    std::vector<Matrix> gain(static_cast<std::size_t>(G));
    for (Index g = 0; g < G; ++g) {
      if (pat.obs.empty()) continue;
      const Matrix& sigma = params.Sigma[static_cast<std::size_t>(g)];
      const Matrix s_oo = select(sigma, pat.obs, pat.obs);
      Eigen::LLT<Matrix> llt(s_oo);
      if (llt.info() != Eigen::Success) {
        llt.compute(s_oo + ctx.cov_floor * Matrix::Identity(s_oo.rows(), s_oo.cols()));
        if (llt.info() != Eigen::Success) throw NumericalError("degenerate observed block");
      }
      gain[static_cast<std::size_t>(g)] = llt.solve(select(sigma, pat.obs, pat.mis)).transpose();
    }
    for (Index i : pat.rows) {
      FractionalRecord rec;
      rec.row = i;
      rec.missing = pat.mis;
      rec.weights = pi.row(i).transpose();
      rec.means.resize(G, m);
      for (Index g = 0; g < G; ++g) {
        const Matrix& mug = mu[static_cast<std::size_t>(g)];
        Vector cond(m);
        for (Index k = 0; k < m; ++k) cond(k) = mug(i, pat.mis[static_cast<std::size_t>(k)]);
        if (!pat.obs.empty()) {
          Vector resid(static_cast<Index>(pat.obs.size()));
          for (std::size_t k = 0; k < pat.obs.size(); ++k) {
            resid(static_cast<Index>(k)) = data.y(i, pat.obs[k]) - mug(i, pat.obs[k]);
          }
          cond += gain[static_cast<std::size_t>(g)] * resid;
        }
        rec.means.row(g) = cond.transpose();
      }
      const Vector blended = rec.means.transpose() * rec.weights;
      for (Index k = 0; k < m; ++k) out.y_imputed(i, pat.mis[static_cast<std::size_t>(k)]) = blended(k);
      records[static_cast<std::size_t>(i)] = std::move(rec);
      has_record[static_cast<std::size_t>(i)] = true;
    }
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (has_record[i]) out.fractional.push_back(std::move(records[i]));
  }
  return out;
}

Vector estimate_mean(const Dataset& data, const ImputationResult& result) {
  if (result.y_imputed.rows() != data.n() || result.y_imputed.cols() != data.p()) {
    throw DataError("imputation result does not match data");
  }
  return result.y_imputed.colwise().mean().transpose();
}

Vector solve_estimating_equation(const Dataset& data, const ImputationResult& result,
                                 const EstimatingFunction& U, const Vector& xi0,
                                 const SolverOptions& options) {
  const std::vector<Unit> units = fractional_units(data, result);
  const double n = static_cast<double>(data.n());
  auto residual = [&](const Vector& xi) {
    Vector total = Vector::Zero(xi.size());
    for (const auto& u : units) {
      const Vector val = U(xi, data.x.row(u.row).transpose(), u.y);
      if (val.size() != xi.size()) throw UsageError("estimating function has wrong length");
      total += u.weight * val;
    }
    return Vector(total / n);
  };
  Vector xi = xi0;
  Vector f = residual(xi);
  for (int it = 0; it < options.max_iter; ++it) {
    if (f.cwiseAbs().maxCoeff() < options.tol) return xi;
    Matrix jac(xi.size(), xi.size());
    for (Index k = 0; k < xi.size(); ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(xi(k)));
      Vector shifted = xi;
      shifted(k) += h;
      jac.col(k) = (residual(shifted) - f) / h;
    }
    const Vector step = jac.colPivHouseholderQr().solve(-f);
    if (!step.allFinite()) break;
    double t = 1.0;
    bool moved = false;
    for (int h = 0; h < 30; ++h, t *= 0.5) {
      const Vector trial = xi + t * step;
      const Vector ft = residual(trial);
      if (ft.norm() < f.norm()) {
        xi = trial;
        f = ft;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  if (f.cwiseAbs().maxCoeff() < options.tol) return xi;
  throw NumericalError("estimating equation did not converge (residual " +
                       std::to_string(f.cwiseAbs().maxCoeff()) + ")");
}

double fractional_quantile(const Dataset& data, const ImputationResult& result, Index column,
                           double tau) {
  if (column < 0 || column >= data.p()) throw UsageError("response column out of range");
  if (!(tau > 0.0 && tau < 1.0)) throw UsageError("quantile level must lie in (0, 1)");
  std::vector<std::pair<double, double>> points;
  for (const auto& u : fractional_units(data, result)) points.emplace_back(u.y(column), u.weight);
  std::sort(points.begin(), points.end());
  const double target = tau * static_cast<double>(data.n());
  double cumulative = 0.0;
  for (const auto& [value, weight] : points) {
    cumulative += weight;
    if (cumulative >= target * (1.0 - 1e-12)) return value;
  }
  return points.back().first;
}

std::vector<IndexList> jackknife_groups(Index n, int n_groups, std::uint64_t seed) {
  if (n_groups < 2 || n_groups > n) throw UsageError("jackknife needs 2 <= groups <= n");
  IndexList perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 rng(derive_seed(seed, 0x1ac4));
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<IndexList> groups(static_cast<std::size_t>(n_groups));
  for (int k = 0; k < n_groups; ++k) {
    const Index lo = n * k / n_groups;
    const Index hi = n * (k + 1) / n_groups;
    groups[static_cast<std::size_t>(k)].assign(perm.begin() + lo, perm.begin() + hi);
  }
  return groups;
}

JackknifeReport jackknife(const Dataset& data, const Pipeline& pipeline, int n_groups,
                          std::uint64_t seed, int threads) {
  const auto groups = jackknife_groups(data.n(), n_groups, seed);
  JackknifeReport report;
  report.n_groups = n_groups;
  report.point = pipeline(data);
  std::vector<Vector> replicates(groups.size());
  parallel_for(groups.size(), threads, [&](std::size_t k) {
    std::vector<bool> dropped(static_cast<std::size_t>(data.n()), false);
    for (Index i : groups[k]) dropped[static_cast<std::size_t>(i)] = true;
    IndexList keep;
    for (Index i = 0; i < data.n(); ++i) {
      if (!dropped[static_cast<std::size_t>(i)]) keep.push_back(i);
    }
    try {
      replicates[k] = pipeline(subset_rows(data, keep));
    } catch (const Error& e) {
      throw NumericalError("jackknife replicate for group " + std::to_string(k + 1) +
                           " failed: " + e.what());
    }
  });
  Vector mean = Vector::Zero(report.point.size());
  for (const auto& r : replicates) mean += r;
  mean /= static_cast<double>(n_groups);
  report.variance = Vector::Zero(mean.size());
  for (const auto& r : replicates) report.variance += (r - mean).cwiseAbs2();
  report.variance *= static_cast<double>(n_groups - 1) / static_cast<double>(n_groups);
  const Vector half = 1.96 * report.variance.cwiseSqrt();
  report.ci_lower = report.point - half;
  report.ci_upper = report.point + half;
  return report;
}

Pipeline warm_start_pipeline(CgmmParams full_fit, FitConfig cfg, Estimator estimator) {
  return [full_fit = std::move(full_fit), cfg, estimator = std::move(estimator)](
             const Dataset& d) {
    const FitReport refit = fit_em_from(d, full_fit, cfg);
    return estimator(d, impute(d, refit.params));
  };
}

Estimator summary_estimator(Index column) {
  return [column](const Dataset& d, const ImputationResult& r) {
    Vector out(4);
    out(0) = fractional_quantile(d, r, column, 0.25);
    out(1) = fractional_quantile(d, r, column, 0.5);
    out(2) = estimate_mean(d, r)(column);
    out(3) = fractional_quantile(d, r, column, 0.75);
    return out;
  };
}

Estimator mean_estimator() {
  return [](const Dataset& d, const ImputationResult& r) { return estimate_mean(d, r); };
}

}  // namespace cgmm

#include "cgmm/gmm_baseline.hpp"

#include <cmath>
#include <limits>

#include "cgmm/errors.hpp"

namespace cgmm {

Dataset joint_dataset(const Dataset& data) {
  Dataset joint;
  joint.x = data.x;
  joint.y.resize(data.n(), data.q() + data.p());
  joint.y << data.x, data.y;
  joint.delta.resize(data.n(), data.q() + data.p());
  joint.delta.leftCols(data.q()).setConstant(true);
  joint.delta.rightCols(data.p()) = data.delta;
  return joint;
}

GmmFit fit_gmm_baseline(const Dataset& data, int G, const FitConfig& cfg) {
  FitConfig c = cfg;
  c.G = G;
  GmmFit fit;
  fit.q = data.q();
  fit.p = data.p();
  fit.report = fit_em(joint_dataset(data), DesignSpec::intercept_only(), c);
  return fit;
}

ImputationResult GmmFit::impute(const Dataset& data) const {
  if (data.q() != q || data.p() != p) throw DataError("data does not match the fitted GMM");
  ImputationResult joint = cgmm::impute(joint_dataset(data), report.params);
  ImputationResult out;
  out.params_used = report.params;
  out.y_imputed = joint.y_imputed.rightCols(p);
  for (auto& rec : joint.fractional) {
    for (auto& j : rec.missing) j -= q;
    out.fractional.push_back(std::move(rec));
  }
  return out;
}

double GmmFit::conditional_logpdf(const Eigen::Ref<const Vector>& x_row,
                                  const Eigen::Ref<const Vector>& y_row) const {
  const CgmmParams& params = report.params;
  const Index G = params.G();
  const Vector weights = gate_probs(Vector::Ones(1), params.alpha);
  Vector joint_terms(G);
  Vector marginal_terms(G);
  Vector v(q + p);
  v << x_row, y_row;
  IndexList xs(static_cast<std::size_t>(q));
  for (Index j = 0; j < q; ++j) xs[static_cast<std::size_t>(j)] = j;
  for (Index g = 0; g < G; ++g) {
    const auto gi = static_cast<std::size_t>(g);
    const Vector mean = params.B[gi].row(0).transpose();
    const Matrix& cov = params.Sigma[gi];
    const double lw = std::log(weights(g));
    joint_terms(g) = lw + gaussian_logpdf(v, mean, cov, 1e-300);
    marginal_terms(g) = lw + gaussian_logpdf(x_row, select(mean, xs), select(cov, xs, xs), 1e-300);
  }
  auto lse = [](const Vector& t) {
    const double m = t.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((t.array() - m).exp().sum());
  };
  return lse(joint_terms) - lse(marginal_terms);
}

GmmSelection select_gmm(const Dataset& data, const FitConfig& cfg, const std::vector<int>& g_range) {
  if (g_range.empty()) throw UsageError("G range is empty");
  GmmSelection sel;
  double best = std::numeric_limits<double>::infinity();
  std::string first_error;
  for (int G : g_range) {
    try {
      GmmFit fit = fit_gmm_baseline(data, G, cfg);
      sel.bic.emplace_back(G, fit.report.bic);
      if (fit.report.bic < best) {
        best = fit.report.bic;
        sel.best_g = G;
        sel.best = std::move(fit);
      }
    } catch (const NumericalError& e) {
      if (first_error.empty()) first_error = "G=" + std::to_string(G) + ": " + e.what();
    }
  }
  if (sel.best_g == 0) {
    throw NumericalError("GMM fit failed for every G in range (" + first_error + ")");
  }
  return sel;
}

}  // namespace cgmm

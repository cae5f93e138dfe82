#include "cgmm/kl.hpp"

#include <algorithm>
#include <cmath>

#include "cgmm/errors.hpp"
#include "cgmm/parallel.hpp"

namespace cgmm {

KlEstimate kl_estimate(const Matrix& xs, const Matrix& ys, const LogDensity& log_true,
                       const LogDensity& log_fit, double log_floor) {
  if (xs.rows() != ys.rows() || xs.rows() < 2) throw DataError("kl: need at least two draws");
  KlEstimate out;
  const Index m = xs.rows();
  Vector d(m);
  auto clip = [&](double v) {
    if (std::isnan(v) || v < log_floor) {
      ++out.clipped;
      return log_floor;
    }
    if (std::isinf(v)) {
      ++out.clipped;
      return -log_floor;
    }
    return v;
  };
  for (Index i = 0; i < m; ++i) {
    const Vector x = xs.row(i).transpose();
    const Vector y = ys.row(i).transpose();
    d(i) = clip(log_true(x, y)) - clip(log_fit(x, y));
  }
  out.kl = d.mean();
  const double var = (d.array() - out.kl).square().sum() / static_cast<double>(m - 1);
  out.se = std::sqrt(var / static_cast<double>(m));
  return out;
}

KlReport kl_diagnostic(const SimModelSpec& spec, const LogDensity& a, const LogDensity& b,
                       Index m_draws, std::uint64_t seed) {
  if (spec.model != SimModel::M1 && spec.model != SimModel::M2 && spec.model != SimModel::M3 &&
      spec.model != SimModel::M4) {
    throw UsageError("kl diagnostic needs a closed-form density (models M1-M4)");
  }
  SimModelSpec fresh = spec;
  fresh.N = std::max<Index>(m_draws, 2);
  fresh.n = 2;
  fresh.seed = derive_seed(seed, 0x6b6c);
  const SimData draws = generate(fresh);
  const double c = draws.threshold;
  const SimModel model = spec.model;
  LogDensity truth = [model, c](const Vector& x, const Vector& y) {
    return true_conditional_logpdf(model, x, y, c);
  };
  KlReport out;
  out.draws = fresh.N;
  out.a = kl_estimate(draws.x_population, draws.y_population, truth, a);
  out.b = kl_estimate(draws.x_population, draws.y_population, truth, b);
  return out;
}

}  // namespace cgmm

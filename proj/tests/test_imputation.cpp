#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cgmm/errors.hpp"
#include "cgmm/imputation.hpp"
#include "helpers.hpp"

using namespace cgmm;

namespace {

CgmmParams regression_params(const Matrix& b, const Matrix& sigma) {
  CgmmParams p;
  p.design = DesignSpec::full(b.rows() - 1);
  p.alpha = Matrix::Zero(1, b.rows());
  p.B = {b};
  p.Sigma = {sigma};
  return p;
}

Dataset sample_from(const Vector& y) {
  Dataset d;
  d.x = Vector::LinSpaced(y.size(), -1.0, 1.0);
  d.y = y;
  d.delta = Mask::Constant(y.size(), 1, true);
  return d;
}

}  // namespace

TEST_CASE("impute: fully observed data is unchanged") {
  const Dataset d = testutil::linear_data(30, 2, 2, 1);
  const CgmmParams p = regression_params(Matrix::Ones(3, 2), Matrix::Identity(2, 2));
  const ImputationResult r = impute(d, p);
  CHECK(r.y_imputed == d.y);
  CHECK(r.fractional.empty());
}

TEST_CASE("impute: single component scalar response is the regression prediction") {
  const Dataset d = testutil::linear_data(40, 2, 1, 2, 0.4);
  Matrix b(3, 1);
  b << 0.5, -1.0, 2.0;
  const ImputationResult r = impute(d, regression_params(b, Matrix::Constant(1, 1, 3.0)));
  for (Index i = 0; i < d.n(); ++i) {
    if (d.delta(i, 0)) {
      CHECK(r.y_imputed(i, 0) == d.y(i, 0));
    } else {
      CHECK(r.y_imputed(i, 0) == doctest::Approx(0.5 - d.x(i, 0) + 2.0 * d.x(i, 1)));
    }
  }
}

TEST_CASE("impute: two components with one missing coordinate, by hand") {
  CgmmParams p;
  p.design = DesignSpec::full(1);
  p.alpha = Matrix::Zero(2, 2);
  p.alpha(1, 1) = 1.0;
  Matrix b1(2, 2), b2(2, 2);
  b1 << 0.0, 1.0, 1.0, 0.0;
  b2 << 2.0, -1.0, 0.0, 1.0;
  Matrix s1(2, 2), s2(2, 2);
  s1 << 1.0, 0.5, 0.5, 2.0;
  s2 << 2.0, -0.4, -0.4, 1.0;
  p.B = {b1, b2};
  p.Sigma = {s1, s2};

  Dataset d;
  d.x = Matrix::Constant(1, 1, 0.5);
  d.y.resize(1, 2);
  d.y << 1.5, std::nan("");
  d.delta = Mask::Constant(1, 2, true);
  d.delta(0, 1) = false;

  // Component means at x = 0.5: (0.5, 1.0) and (2.0, -0.5).
  const double g2 = std::exp(0.5) / (1.0 + std::exp(0.5));
  auto dens = [](double y, double m, double v) {
    return std::exp(-0.5 * (y - m) * (y - m) / v) / std::sqrt(2.0 * M_PI * v);
  };
  const double f1 = (1.0 - g2) * dens(1.5, 0.5, 1.0);
  const double f2 = g2 * dens(1.5, 2.0, 2.0);
  const double w2 = f2 / (f1 + f2);
  const double m1 = 1.0 + 0.5 * (1.5 - 0.5);
  const double m2 = -0.5 - 0.2 * (1.5 - 2.0);

  const ImputationResult r = impute(d, p);
  REQUIRE(r.fractional.size() == 1);
  const FractionalRecord& rec = r.fractional.front();
  CHECK(rec.missing == IndexList{1});
  CHECK(rec.weights(1) == doctest::Approx(w2).epsilon(1e-12));
  CHECK(rec.weights.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(rec.means(0, 0) == doctest::Approx(m1).epsilon(1e-12));
  CHECK(rec.means(1, 0) == doctest::Approx(m2).epsilon(1e-12));
  CHECK(r.y_imputed(0, 1) == doctest::Approx((1.0 - w2) * m1 + w2 * m2).epsilon(1e-12));
  CHECK(r.y_imputed(0, 0) == 1.5);
}

TEST_CASE("impute: fractional records agree with the conditional Gaussian") {
  const Dataset d = testutil::mixed_missing_data(200, 2, 3, 3, 0.35);
  FitConfig cfg;
  cfg.G = 2;
  cfg.n_starts = 2;
  const FitReport fit = fit_em(d, DesignSpec::full(2), cfg);
  const ImputationResult r = impute(d, fit.params);
  const Responsibilities post = e_step(d, fit.params);
  for (const FractionalRecord& rec : r.fractional) {
    CHECK(rec.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
    const Index i = rec.row;
    CHECK((rec.weights - post.pi.row(i).transpose()).cwiseAbs().maxCoeff() < 1e-12);
    const IndexList obs = d.observed(i);
    for (Index g = 0; g < 2; ++g) {
      GaussianBlock block{component_mean(fit.params.design, d.x.row(i).transpose(), fit.params.B[g]),
                          fit.params.Sigma[g], obs, rec.missing};
      const ConditionalGaussian c = conditional_gaussian(block, select(Vector(d.y.row(i).transpose()), obs));
      CHECK((rec.means.row(g).transpose() - c.mean).cwiseAbs().maxCoeff() < 1e-10);
    }
    for (Index k = 0; k < static_cast<Index>(rec.missing.size()); ++k) {
      const double expect = rec.weights.dot(rec.means.col(k));
      CHECK(r.y_imputed(i, rec.missing[static_cast<std::size_t>(k)]) == doctest::Approx(expect));
    }
  }
  CHECK(r.y_imputed.allFinite());
}

TEST_CASE("estimate_mean: no missing data is the sample mean") {
  const Dataset d = testutil::linear_data(50, 1, 2, 4);
  const ImputationResult r = impute(d, regression_params(Matrix::Zero(2, 2), Matrix::Identity(2, 2)));
  const Vector m = estimate_mean(d, r);
  CHECK((m - d.y.colwise().mean().transpose()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("estimate_mean: all missing with one component is the mean prediction") {
  Dataset d = testutil::linear_data(50, 2, 1, 5);
  d.delta.setConstant(false);
  Matrix b(3, 1);
  b << 1.0, 2.0, -0.5;
  const ImputationResult r = impute(d, regression_params(b, Matrix::Constant(1, 1, 1.0)));
  const double expect = (testutil::with_intercept(d.x) * b).mean();
  CHECK(estimate_mean(d, r)(0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("solve_estimating_equation: linear function gives the mean estimator") {
  const Dataset d = testutil::mixed_missing_data(150, 1, 2, 6, 0.3);
  FitConfig cfg;
  cfg.G = 2;
  cfg.n_starts = 2;
  const ImputationResult r = impute(d, fit_em(d, DesignSpec::full(1), cfg).params);
  const EstimatingFunction u = [](const Vector& xi, const Vector&, const Vector& y) {
    return Vector(y - xi);
  };
  const Vector xi = solve_estimating_equation(d, r, u, Vector::Zero(2));
  CHECK((xi - estimate_mean(d, r)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("solve_estimating_equation: quadratic root matches a grid search") {
  Dataset d = testutil::linear_data(60, 1, 1, 7, 0.3);
  const ImputationResult r =
      impute(d, regression_params((Matrix(2, 1) << 1.0, 0.5).finished(), Matrix::Ones(1, 1)));
  const EstimatingFunction u = [](const Vector& xi, const Vector&, const Vector& y) {
    return Vector::Constant(1, y(0) * y(0) - xi(0) * xi(0));
  };
  const Vector xi = solve_estimating_equation(d, r, u, Vector::Constant(1, 1.0));
  // Left-hand side is (1/n) sum_i sum_g w_ig y_ig^2 - xi^2 with y_ig the completed rows.
  double target = 0.0;
  for (Index i = 0; i < d.n(); ++i) target += r.y_imputed(i, 0) * r.y_imputed(i, 0);
  target /= static_cast<double>(d.n());
  double lo = 0.0, hi = 100.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mid * mid < target ? lo : hi) = mid;
  }
  CHECK(xi(0) == doctest::Approx(lo).epsilon(1e-8));
}

TEST_CASE("solve_estimating_equation: no root is reported") {
  const Dataset d = testutil::linear_data(20, 1, 1, 8);
  const ImputationResult r = impute(d, regression_params(Matrix::Zero(2, 1), Matrix::Ones(1, 1)));
  const EstimatingFunction u = [](const Vector& xi, const Vector&, const Vector&) {
    return Vector::Constant(1, xi(0) * xi(0) + 1.0);
  };
  CHECK_THROWS_AS(solve_estimating_equation(d, r, u, Vector::Constant(1, 0.5)), NumericalError);
}

TEST_CASE("fractional_quantile: no missing data gives the empirical quantile") {
  Vector y(5);
  y << 3.0, 1.0, 4.0, 1.5, 9.0;
  const Dataset d = sample_from(y);
  const ImputationResult r = impute(d, regression_params(Matrix::Zero(2, 1), Matrix::Ones(1, 1)));
  CHECK(fractional_quantile(d, r, 0, 0.5) == 3.0);
  CHECK(fractional_quantile(d, r, 0, 0.2) == 1.0);
  CHECK(fractional_quantile(d, r, 0, 0.21) == 1.5);
  CHECK(fractional_quantile(d, r, 0, 0.99) == 9.0);
}

TEST_CASE("jackknife_groups partition the rows") {
  const auto groups = jackknife_groups(103, 10, 5);
  REQUIRE(groups.size() == 10);
  std::vector<int> seen(103, 0);
  for (const auto& g : groups) {
    CHECK((g.size() == 10 || g.size() == 11));
    for (Index i : g) ++seen[static_cast<std::size_t>(i)];
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
}

TEST_CASE("jackknife: sample mean with one row per group gives s^2/n") {
  std::mt19937_64 rng(9);
  const Vector y = testutil::random_normal(30, 1, rng);
  const Dataset d = sample_from(y);
  const Pipeline mean = [](const Dataset& s) { return Vector(s.y.colwise().mean().transpose()); };
  const JackknifeReport rep = jackknife(d, mean, 30, 1);
  const double s2 = (y.array() - y.mean()).square().sum() / 29.0;
  CHECK(rep.variance(0) == doctest::Approx(s2 / 30.0).epsilon(1e-12));
  CHECK(rep.point(0) == doctest::Approx(y.mean()));
  CHECK(rep.ci_lower(0) == doctest::Approx(y.mean() - 1.96 * std::sqrt(s2 / 30.0)));
}

TEST_CASE("jackknife: constant estimator has zero variance") {
  const Dataset d = sample_from(Vector::LinSpaced(40, 0.0, 1.0));
  const Pipeline constant = [](const Dataset&) { return Vector::Constant(1, 2.5); };
  const JackknifeReport rep = jackknife(d, constant, 8, 3);
  CHECK(rep.variance(0) == 0.0);
}

TEST_CASE("jackknife: variance does not depend on group order") {
  std::mt19937_64 rng(10);
  const Vector y = testutil::random_normal(60, 1, rng).array().exp();
  const Dataset d = sample_from(y);
  const Pipeline median = [](const Dataset& s) {
    std::vector<double> v(s.y.data(), s.y.data() + s.y.rows());
    std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() / 2), v.end());
    return Vector::Constant(1, v[v.size() / 2]);
  };
  const int K = 12;
  const JackknifeReport rep = jackknife(d, median, K, 4, 2);
  auto groups = jackknife_groups(60, K, 4);
  std::reverse(groups.begin(), groups.end());
  std::vector<double> reps;
  for (const auto& g : groups) {
    IndexList keep;
    for (Index i = 0; i < 60; ++i) {
      if (std::find(g.begin(), g.end(), i) == g.end()) keep.push_back(i);
    }
    reps.push_back(median(subset_rows(d, keep))(0));
  }
  double mean = 0.0;
  for (double r : reps) mean += r / K;
  double v = 0.0;
  for (double r : reps) v += (r - mean) * (r - mean);
  v *= (K - 1.0) / K;
  CHECK(rep.variance(0) == doctest::Approx(v).epsilon(1e-12));
}

TEST_CASE("jackknife: a failing replicate names its group") {
  const Dataset d = sample_from(Vector::LinSpaced(20, 0.0, 1.0));
  const Pipeline flaky = [](const Dataset& s) -> Vector {
    if (s.n() < 20 && s.y.minCoeff() > 0.0) throw NumericalError("refit failed");
    return Vector::Constant(1, s.y.mean());
  };
  CHECK_THROWS_WITH_AS(jackknife(d, flaky, 5, 1), doctest::Contains("group"), NumericalError);
}

TEST_CASE("jackknife: invalid group counts") {
  const Dataset d = sample_from(Vector::LinSpaced(10, 0.0, 1.0));
  const Pipeline mean = [](const Dataset& s) { return Vector(s.y.colwise().mean().transpose()); };
  CHECK_THROWS_AS(jackknife(d, mean, 1, 1), UsageError);
  CHECK_THROWS_AS(jackknife(d, mean, 11, 1), UsageError);
}

TEST_CASE("warm_start_pipeline with one component is regression imputation") {
  const Dataset d = testutil::linear_data(120, 2, 1, 11, 0.4);
  FitConfig cfg;
  cfg.G = 1;
  cfg.max_iter = 50;
  cfg.n_starts = 1;
  const FitReport full = fit_em(d, DesignSpec::full(2), cfg);
  const Pipeline pipe = warm_start_pipeline(full.params, cfg, mean_estimator());
  IndexList obs;
  for (Index i = 0; i < d.n(); ++i) {
    if (d.delta(i, 0)) obs.push_back(i);
  }
  const Dataset cc = subset_rows(d, obs);
  const Matrix b = testutil::ols(cc.x, cc.y).first;
  double expect = 0.0;
  for (Index i = 0; i < d.n(); ++i) {
    expect += d.delta(i, 0) ? d.y(i, 0) : b(0, 0) + b(1, 0) * d.x(i, 0) + b(2, 0) * d.x(i, 1);
  }
  expect /= static_cast<double>(d.n());
  CHECK(pipe(d)(0) == doctest::Approx(expect).epsilon(1e-8));
}

TEST_CASE("summary_estimator returns quartiles and mean") {
  Vector y(8);
  y << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0;
  const Dataset d = sample_from(y);
  const ImputationResult r = impute(d, regression_params(Matrix::Zero(2, 1), Matrix::Ones(1, 1)));
  const Vector s = summary_estimator(0)(d, r);
  REQUIRE(s.size() == 4);
  CHECK(s(0) == 2.0);
  CHECK(s(1) == 4.0);
  CHECK(s(2) == doctest::Approx(4.5));
  CHECK(s(3) == 6.0);
}

#include "cgmm/sim.hpp"

#include <algorithm>
#include <cctype>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include "cgmm/errors.hpp"
#include "cgmm/parallel.hpp"

namespace cgmm {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

// Model 1: joint Gaussian mixture for (x1, x2, y).
constexpr std::array<double, 3> kM1Weights{0.4, 0.3, 0.3};
const std::array<std::array<double, 3>, 3> kM1Means{{{0.0, -2.0, 1.0}, {2.0, 0.0, 3.0}, {-2.0, 2.0, -3.0}}};

// Models 2-4: covariate mixture, latent U and two regression regimes.
constexpr std::array<double, 4> kM2Weights{0.2, 0.3, 0.2, 0.3};
const std::array<std::array<double, 2>, 4> kM2Means{{{-1.0, 0.5}, {1.0, 1.0}, {0.5, -1.0}, {0.0, 0.0}}};
constexpr std::array<double, 3> kM2Gate{1.0, 1.0, 0.5};
constexpr std::array<double, 3> kM2Beta1{1.0, 2.0, -2.0};
constexpr std::array<double, 3> kM2Beta2{-1.0, 0.5, -0.5};

// Models 5-6: the first entries of the gate and regime coefficient vectors;
// the remaining entries are zero.
constexpr std::array<double, 4> kM5Weights{0.2, 0.3, 0.2, 0.3};
constexpr std::array<double, 4> kM5MeanLevels{1.0, 2.0, -1.0, -2.0};
constexpr std::array<double, 6> kM5Gate{1.0, 1.0, 0.0, 1.0, 0.0, 1.0};
constexpr std::array<double, 5> kM5Beta1{-1.0, 0.0, 2.5, 0.0, 3.0};
constexpr std::array<double, 5> kM5Beta2{1.0, 0.0, -2.5, 0.0, -1.0};

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

Matrix m1_covariance() {
  Matrix s(3, 3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) s(i, j) = std::pow(-0.2, std::abs(i - j));
  }
  return s;
}

template <std::size_t K>
std::vector<int> draw_labels(const std::array<double, K>& weights, Index N, std::mt19937_64& rng) {
  std::discrete_distribution<int> dist(weights.begin(), weights.end());
  std::vector<int> labels(static_cast<std::size_t>(N));
  for (auto& l : labels) l = dist(rng);
  return labels;
}

void standardize_columns(Matrix& m) {
  for (Index c = 0; c < m.cols(); ++c) {
    const double mean = m.col(c).mean();
    m.col(c).array() -= mean;
    const double sd = std::sqrt(m.col(c).squaredNorm() / static_cast<double>(m.rows()));
    if (sd > 0.0) m.col(c) /= sd;
  }
}

struct Population {
  Matrix x;
  Matrix y;
  std::vector<int> labels;
  std::vector<int> regime;
  double threshold = 0.0;
};

Population population_m1(Index N, std::mt19937_64& rng) {
  Population pop;
  pop.labels = draw_labels(kM1Weights, N, rng);
  const Matrix chol = m1_covariance().llt().matrixL();
  std::normal_distribution<double> z(0.0, 1.0);
  pop.x.resize(N, 2);
  pop.y.resize(N, 1);
  Vector e(3);
  for (Index i = 0; i < N; ++i) {
    for (int k = 0; k < 3; ++k) e(k) = z(rng);
    const auto& mu = kM1Means[static_cast<std::size_t>(pop.labels[static_cast<std::size_t>(i)])];
    const Vector v = chol * e + Eigen::Map<const Vector>(mu.data(), 3);
    pop.x.row(i) = v.head(2).transpose();
    pop.y(i, 0) = v(2);
  }
  pop.regime.assign(static_cast<std::size_t>(N), -1);
  return pop;
}

Population population_m2_to_m4(SimModel model, Index N, std::mt19937_64& rng) {
  Population pop;
  pop.labels = draw_labels(kM2Weights, N, rng);
  std::normal_distribution<double> z(0.0, 1.0);
  std::gamma_distribution<double> gamma(1.0, 1.0);
  pop.x.resize(N, 2);
  pop.y.resize(N, 1);
  // Covariates: correlated normal for M2, componentwise lognormal for M3/M4.
  const double rho = 0.1;
  for (Index i = 0; i < N; ++i) {
    const auto& mu = kM2Means[static_cast<std::size_t>(pop.labels[static_cast<std::size_t>(i)])];
    const double e1 = z(rng);
    const double e2 = z(rng);
    if (model == SimModel::M2) {
      pop.x(i, 0) = mu[0] + e1;
      pop.x(i, 1) = mu[1] + rho * e1 + std::sqrt(1.0 - rho * rho) * e2;
    } else {
      pop.x(i, 0) = std::exp(mu[0] + std::sqrt(0.5) * e1);
      pop.x(i, 1) = std::exp(mu[1] + std::sqrt(0.5) * e2);
    }
  }
  std::vector<double> u(static_cast<std::size_t>(N));
  for (Index i = 0; i < N; ++i) {
    u[static_cast<std::size_t>(i)] =
        kM2Gate[0] + kM2Gate[1] * pop.x(i, 0) + kM2Gate[2] * pop.x(i, 1) + z(rng);
  }
  pop.threshold = sample_quantile(u, 0.6);
  pop.regime.resize(static_cast<std::size_t>(N));
  for (Index i = 0; i < N; ++i) {
    const int h = u[static_cast<std::size_t>(i)] < pop.threshold ? 0 : 1;
    pop.regime[static_cast<std::size_t>(i)] = h;
    const auto& b = h == 0 ? kM2Beta1 : kM2Beta2;
    const double mean = b[0] + b[1] * pop.x(i, 0) + b[2] * pop.x(i, 1);
    pop.y(i, 0) = mean + (model == SimModel::M4 ? gamma(rng) : z(rng));
  }
  return pop;
}

Population population_m5_m6(SimModel model, Index N, Index q, std::mt19937_64& rng) {
  Population pop;
  pop.labels = draw_labels(kM5Weights, N, rng);
  std::normal_distribution<double> z(0.0, 1.0);
  std::gamma_distribution<double> gamma(1.0, 1.0);
  Matrix cov(q, q);
  for (Index i = 0; i < q; ++i) {
    for (Index j = 0; j < q; ++j) cov(i, j) = std::pow(0.5, static_cast<double>(std::abs(i - j)));
  }
  const Matrix chol = cov.llt().matrixL();
  Vector gate = Vector::Zero(q + 1);
  for (std::size_t k = 0; k < kM5Gate.size() && static_cast<Index>(k) <= q; ++k) gate(static_cast<Index>(k)) = kM5Gate[k];
  Vector b1 = Vector::Zero(q + 1), b2 = Vector::Zero(q + 1);
  for (std::size_t k = 0; k < kM5Beta1.size() && static_cast<Index>(k) <= q; ++k) {
    b1(static_cast<Index>(k)) = kM5Beta1[k];
    b2(static_cast<Index>(k)) = kM5Beta2[k];
  }
  pop.x.resize(N, q);
  pop.y.resize(N, 1);
  Vector e(q);
  for (Index i = 0; i < N; ++i) {
    for (Index k = 0; k < q; ++k) e(k) = z(rng);
    const double level = kM5MeanLevels[static_cast<std::size_t>(pop.labels[static_cast<std::size_t>(i)])];
    pop.x.row(i) = (chol * e).array() + level;
  }
  std::vector<double> u(static_cast<std::size_t>(N));
  for (Index i = 0; i < N; ++i) {
    u[static_cast<std::size_t>(i)] = gate(0) + pop.x.row(i).dot(gate.tail(q)) + z(rng);
  }
  pop.threshold = sample_quantile(u, 0.6);
  pop.regime.resize(static_cast<std::size_t>(N));
  for (Index i = 0; i < N; ++i) {
    const int h = u[static_cast<std::size_t>(i)] < pop.threshold ? 0 : 1;
    pop.regime[static_cast<std::size_t>(i)] = h;
    const Vector& b = h == 0 ? b1 : b2;
    const double mean = b(0) + pop.x.row(i).dot(b.tail(q));
    pop.y(i, 0) = mean + (model == SimModel::M6 ? gamma(rng) : z(rng));
  }
  standardize_columns(pop.x);
  standardize_columns(pop.y);
  return pop;
}

// Synthetic survey/administrative income data. Columns of x: standardized
// age, standardized education, standardized survey income, raw survey
// income (KRW 1,000). Experts are ratio models y = beta_g * survey income;
// the first regime reproduces the survey value exactly.
Population population_m7(Index N, std::mt19937_64& rng) {
  Population pop;
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> age_dist(20.0, 70.0);
  std::discrete_distribution<int> edu_dist({0.05, 0.15, 0.35, 0.35, 0.1});
  Matrix raw(N, 3);
  for (Index i = 0; i < N; ++i) {
    const double age = age_dist(rng);
    const double edu = 1.0 + edu_dist(rng);
    const double log_income = std::log(24000.0) - 0.0004 * (age - 45.0) * (age - 45.0) +
                              0.15 * (edu - 3.0) + 0.6 * z(rng);
    raw(i, 0) = age;
    raw(i, 1) = edu;
    raw(i, 2) = std::exp(log_income);
  }
  Matrix scaled = raw;
  standardize_columns(scaled);
  pop.x.resize(N, 4);
  pop.x.leftCols(3) = scaled;
  pop.x.col(3) = raw.col(2);
  pop.y.resize(N, 1);
  pop.labels.resize(static_cast<std::size_t>(N));
  pop.regime.assign(static_cast<std::size_t>(N), -1);
  const Matrix gate{{0.0, 0.0, 0.0, 0.0},
                    {0.9, -0.1, -0.1, 0.8},
                    {-1.3, 0.4, -0.1, 0.9},
                    {1.0, -0.2, -0.05, 0.7}};
  constexpr std::array<double, 4> ratio{1.0, 1.03, 1.44, 0.96};
  constexpr std::array<double, 4> noise_sd{0.0, 600.0, 7000.0, 2500.0};
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Index i = 0; i < N; ++i) {
    Vector zrow(4);
    zrow << 1.0, scaled(i, 0), scaled(i, 1), scaled(i, 2);
    const Vector probs = gate_probs(zrow, gate);
    double u = unif(rng);
    int g = 0;
    while (g < 3 && u > probs(g)) u -= probs(g++);
    pop.labels[static_cast<std::size_t>(i)] = g;
    const auto gi = static_cast<std::size_t>(g);
    pop.y(i, 0) = ratio[gi] * raw(i, 2) + noise_sd[gi] * z(rng);
  }
  return pop;
}

}  // namespace

std::string to_string(SimModel model) {
  switch (model) {
    case SimModel::M1: return "M1";
    case SimModel::M2: return "M2";
    case SimModel::M3: return "M3";
    case SimModel::M4: return "M4";
    case SimModel::M5: return "M5";
    case SimModel::M6: return "M6";
    case SimModel::M7: return "M7";
  }
  return "?";
}

SimModel parse_sim_model(const std::string& name) {
  std::string upper = name;
  for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (SimModel m : {SimModel::M1, SimModel::M2, SimModel::M3, SimModel::M4, SimModel::M5,
                     SimModel::M6, SimModel::M7}) {
    if (upper == to_string(m)) return m;
  }
  if (upper == "M7SYNTHETIC") return SimModel::M7;
  throw UsageError("unknown model '" + name + "' (expected M1..M7)");
}

void SimModelSpec::validate() const {
  if (n < 2) throw UsageError("sample size must be at least 2");
  if (n > N) throw UsageError("sample size exceeds population size");
  if ((model == SimModel::M5 || model == SimModel::M6) && q < 5) {
    throw UsageError("models M5/M6 need q >= 5");
  }
}

double response_probability(double x1) { return 1.0 / (1.0 + std::exp(-(-0.5 + 0.5 * x1))); }

double sample_quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw DataError("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double h = prob * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

SimData generate(const SimModelSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(derive_seed(spec.seed, static_cast<std::uint64_t>(spec.model) + 101));
  Population pop;
  switch (spec.model) {
    case SimModel::M1: pop = population_m1(spec.N, rng); break;
    case SimModel::M2:
    case SimModel::M3:
    case SimModel::M4: pop = population_m2_to_m4(spec.model, spec.N, rng); break;
    case SimModel::M5:
    case SimModel::M6: pop = population_m5_m6(spec.model, spec.N, spec.q, rng); break;
    case SimModel::M7: pop = population_m7(spec.N, rng); break;
  }

  SimData out;
  out.threshold = pop.threshold;
  out.theta = pop.y.col(0).mean();

  // Simple random sample without replacement (partial Fisher-Yates).
  IndexList idx(static_cast<std::size_t>(spec.N));
  std::iota(idx.begin(), idx.end(), Index{0});
  for (Index k = 0; k < spec.n; ++k) {
    std::uniform_int_distribution<Index> pick(k, spec.N - 1);
    std::swap(idx[static_cast<std::size_t>(k)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  out.sample_rows.assign(idx.begin(), idx.begin() + spec.n);
  std::sort(out.sample_rows.begin(), out.sample_rows.end());

  const Index q = pop.x.cols();
  out.sample.x.resize(spec.n, q);
  out.y_full.resize(spec.n, 1);
  for (Index k = 0; k < spec.n; ++k) {
    out.sample.x.row(k) = pop.x.row(out.sample_rows[static_cast<std::size_t>(k)]);
    out.y_full(k, 0) = pop.y(out.sample_rows[static_cast<std::size_t>(k)], 0);
  }
  out.sample.y = out.y_full;
  out.sample.delta.resize(spec.n, 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Index k = 0; k < spec.n; ++k) {
    double prob = response_probability(out.sample.x(k, 0));
    if (spec.model == SimModel::M7) {
      prob = 1.0 / (1.0 + std::exp(-(1.75 + 0.2 * out.sample.x(k, 0))));
    }
    out.sample.delta(k, 0) = unif(rng) < prob;
    if (!out.sample.delta(k, 0)) out.sample.y(k, 0) = std::numeric_limits<double>::quiet_NaN();
  }

  out.x_population = std::move(pop.x);
  out.y_population = std::move(pop.y);
  out.population_labels = std::move(pop.labels);
  out.population_regime = std::move(pop.regime);
  out.y_names = {"y1"};
  if (spec.model == SimModel::M7) {
    out.x_names = {"x1_age", "x2_edu", "x3_survey_std", "x4_survey"};
    out.design.gate_covariates = {0, 1, 2};
    out.design.mean_covariates = {3};
    out.design.gate_intercept = true;
    out.design.mean_intercept = false;
  } else {
    for (Index j = 0; j < q; ++j) out.x_names.push_back("x" + std::to_string(j + 1));
    out.design = DesignSpec::full(q);
  }
  return out;
}

double true_conditional_logpdf(SimModel model, const Eigen::Ref<const Vector>& x_row,
                               const Eigen::Ref<const Vector>& y_row, double threshold) {
  const double y = y_row(0);
  switch (model) {
    case SimModel::M1: {
      const Matrix cov = m1_covariance();
      const Matrix cov_x = cov.topLeftCorner(2, 2);
      Vector joint(3);
      joint << x_row(0), x_row(1), y;
      Vector jt(3), mt(3);
      for (int g = 0; g < 3; ++g) {
        const auto& mu = kM1Means[static_cast<std::size_t>(g)];
        const Vector m = Eigen::Map<const Vector>(mu.data(), 3);
        const double lw = std::log(kM1Weights[static_cast<std::size_t>(g)]);
        jt(g) = lw + gaussian_logpdf(joint, m, cov);
        mt(g) = lw + gaussian_logpdf(x_row.head(2), m.head(2), cov_x);
      }
      const double a = jt.maxCoeff(), b = mt.maxCoeff();
      return a + std::log((jt.array() - a).exp().sum()) - b - std::log((mt.array() - b).exp().sum());
    }
    case SimModel::M2:
    case SimModel::M3:
    case SimModel::M4: {
      const double lin = kM2Gate[0] + kM2Gate[1] * x_row(0) + kM2Gate[2] * x_row(1);
      const double p1 = normal_cdf(threshold - lin);
      const double m1 = kM2Beta1[0] + kM2Beta1[1] * x_row(0) + kM2Beta1[2] * x_row(1);
      const double m2 = kM2Beta2[0] + kM2Beta2[1] * x_row(0) + kM2Beta2[2] * x_row(1);
      double f = 0.0;
      if (model == SimModel::M4) {
        if (y > m1) f += p1 * std::exp(-(y - m1));
        if (y > m2) f += (1.0 - p1) * std::exp(-(y - m2));
      } else {
        f = p1 * std::exp(-0.5 * (kLog2Pi + (y - m1) * (y - m1))) +
            (1.0 - p1) * std::exp(-0.5 * (kLog2Pi + (y - m2) * (y - m2)));
      }
      return std::log(f);
    }
    default:
      throw UsageError("closed-form density only available for models M1-M4");
  }
}

}  // namespace cgmm

#include "cgmm/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "cgmm/errors.hpp"
#include "cgmm/gmm_baseline.hpp"
#include "cgmm/imputation.hpp"
#include "cgmm/metrics.hpp"
#include "cgmm/parallel.hpp"

namespace cgmm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Outcome {
  bool ok = false;
  double rmspe = kNaN;
  double mae = kNaN;
  double error = kNaN;
  int g = 0;
  IndexList support;
  bool coverage_run = false;
  bool covered = false;
  std::string reason;
};

std::vector<int> g_range(int g_max) {
  std::vector<int> out;
  for (int g = 1; g <= g_max; ++g) out.push_back(g);
  return out;
}

Outcome run_method(Method method, const SimData& sim, const MonteCarloOptions& opt,
                   std::uint64_t seed) {
  Outcome out;
  FitConfig cfg = opt.fit;
  cfg.seed = seed;
  cfg.threads = 1;
  const Dataset& data = sim.sample;
  std::optional<ImputationResult> imputed;
  switch (method) {
    case Method::Full:
      out.error = sim.y_full.col(0).mean() - sim.theta;
      out.ok = true;
      return out;
    case Method::GMM: {
      const GmmSelection sel = select_gmm(data, cfg, g_range(opt.g_max));
      out.g = sel.best_g;
      imputed = sel.best.impute(data);
      break;
    }
    case Method::CGMM: {
      const Selection sel = select_g(data, sim.design, cfg, g_range(opt.g_max));
      out.g = sel.best_g;
      imputed = impute(data, sel.best().params);
      if (opt.coverage) {
        FitConfig jk = cfg;
        jk.max_iter = opt.jackknife_max_iter;
        jk.n_starts = 1;
        const Pipeline pipe = warm_start_pipeline(sel.best().params, jk, mean_estimator());
        const JackknifeReport rep =
            jackknife(data, pipe, opt.jackknife_groups, derive_seed(seed, 0x6a6b), 1);
        out.coverage_run = true;
        out.covered = rep.ci_lower(0) <= sim.theta && sim.theta <= rep.ci_upper(0);
      }
      break;
    }
    case Method::PenalizedCGMM: {
      const PenalizedSelection sel = select_g_penalized(data, cfg, opt.pen, g_range(opt.g_max));
      cfg.G = sel.best_g;
      const CvResult cv = cv_select_lambda(data, cfg, opt.pen);
      const PenalizedFit fit = fit_penalized_em(data, cfg, opt.pen, cv.best_lambda);
      out.g = sel.best_g;
      for (Index j = 1; j < fit.params.beta.rows(); ++j) {
        if ((fit.params.beta.row(j).array() != 0.0).any()) out.support.push_back(j);
      }
      imputed = impute(data, fit.params.to_cgmm(data.q()));
      break;
    }
  }
  const PredictionError pe = compute_metrics(sim.y_full, imputed->y_imputed, data.delta);
  out.rmspe = pe.rmspe;
  out.mae = pe.mae;
  out.error = estimate_mean(data, *imputed)(0) - sim.theta;
  out.ok = true;
  return out;
}

}  // namespace

std::string method_name(Method method) {
  switch (method) {
    case Method::Full: return "Full";
    case Method::GMM: return "GMM";
    case Method::CGMM: return "CGMM";
    case Method::PenalizedCGMM: return "CGMM-lasso";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "full") return Method::Full;
  if (s == "gmm") return Method::GMM;
  if (s == "cgmm") return Method::CGMM;
  if (s == "cgmm-lasso" || s == "lasso" || s == "penalized") return Method::PenalizedCGMM;
  throw UsageError("unknown method '" + name + "' (expected full, gmm, cgmm, cgmm-lasso)");
}

void MonteCarloOptions::validate() const {
  if (reps < 2) throw UsageError("reps must be at least 2");
  if (g_max < 1) throw UsageError("g_max must be at least 1");
  if (jackknife_groups < 2) throw UsageError("jackknife groups must be at least 2");
  if (threads < 1) throw UsageError("threads must be at least 1");
  fit.validate();
  pen.validate();
}

const MetricReport& MonteCarloReport::get(Method method) const {
  for (const auto& m : methods) {
    if (m.method == method) return m;
  }
  throw UsageError("method " + method_name(method) + " not in report");
}

MonteCarloReport monte_carlo(const SimModelSpec& spec, std::vector<Method> methods,
                             const MonteCarloOptions& options) {
  options.validate();
  spec.validate();
  std::sort(methods.begin(), methods.end());
  methods.erase(std::unique(methods.begin(), methods.end()), methods.end());
  if (methods.empty()) throw UsageError("no methods requested");

  const auto R = static_cast<std::size_t>(options.reps);
  std::vector<std::vector<Outcome>> outcomes(methods.size(), std::vector<Outcome>(R));
  parallel_for(R, options.threads, [&](std::size_t r) {
    SimModelSpec rep_spec = spec;
    rep_spec.seed = derive_seed(options.seed, r);
    const SimData sim = generate(rep_spec);
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const std::uint64_t seed =
          derive_seed(options.seed, r, static_cast<std::uint64_t>(methods[m]) + 1);
      try {
        outcomes[m][r] = run_method(methods[m], sim, options, seed);
      } catch (const Error& e) {
        outcomes[m][r].reason = e.what();
      }
    }
  });

  MonteCarloReport report;
  report.spec = spec;
  report.reps = options.reps;
  report.seed = options.seed;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    MetricReport mr;
    mr.method = methods[m];
    std::vector<double> errors;
    double rmspe = 0.0, mae = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
      const Outcome& o = outcomes[m][r];
      mr.rep_rmspe.push_back(o.rmspe);
      mr.rep_mae.push_back(o.mae);
      mr.rep_error.push_back(o.error);
      mr.rep_g.push_back(o.g);
      mr.rep_support.push_back(o.support);
      if (!o.ok) {
        ++mr.failures;
        mr.failure_reasons.push_back("replicate " + std::to_string(r) + ": " + o.reason);
        continue;
      }
      ++mr.successes;
      errors.push_back(o.error);
      rmspe += o.rmspe;
      mae += o.mae;
      if (o.coverage_run) {
        ++mr.coverage_trials;
        if (o.covered) ++mr.coverage_hits;
      }
    }
    if (static_cast<double>(mr.failures) > 0.05 * static_cast<double>(R)) {
      throw NumericalError("monte carlo aborted: " + method_name(mr.method) + " failed in " +
                           std::to_string(mr.failures) + " of " + std::to_string(R) +
                           " replicates (" + mr.failure_reasons.front() + ")");
    }
    if (mr.successes > 0) {
      const EstimatorSummary s = summarize_errors(errors);
      mr.bias = s.bias;
      mr.var = s.var;
      mr.mse = s.mse;
      mr.rmspe = rmspe / mr.successes;
      mr.mae = mae / mr.successes;
    }
    if (mr.method == Method::Full) mr.rmspe = mr.mae = kNaN;
    report.methods.push_back(std::move(mr));
  }
  return report;
}

std::string format_report(const MonteCarloReport& report) {
  std::ostringstream os;
  os << std::fixed;
  os << "model " << to_string(report.spec.model) << ": " << report.reps << " replicates, n="
     << report.spec.n << ", N=" << report.spec.N << ", seed=" << report.seed << "\n";
  os << std::left << std::setw(12) << "method" << std::right << std::setw(9) << "RMSPE"
     << std::setw(9) << "MAE" << std::setw(11) << "bias*100" << std::setw(10) << "var*100"
     << std::setw(10) << "mse*100" << std::setw(7) << "G" << std::setw(10) << "failures"
     << "\n";
  auto num = [&](double v, int width, int prec) {
    if (std::isnan(v)) {
      os << std::setw(width) << "-";
    } else {
      os << std::setw(width) << std::setprecision(prec) << v;
    }
  };
  auto row = [&](const MetricReport& m) {
    os << std::left << std::setw(12) << method_name(m.method) << std::right;
    num(m.rmspe, 9, 4);
    num(m.mae, 9, 4);
    num(100.0 * m.bias, 11, 3);
    num(100.0 * m.var, 10, 3);
    num(100.0 * m.mse, 10, 3);
    std::map<int, int> counts;
    for (int g : m.rep_g) {
      if (g > 0) ++counts[g];
    }
    if (counts.empty()) {
      os << std::setw(7) << "-";
    } else {
      const auto mode = std::max_element(counts.begin(), counts.end(), [](auto& a, auto& b) {
        return a.second < b.second;
      });
      os << std::setw(7) << mode->first;
    }
    os << std::setw(10) << m.failures << "\n";
  };
  bool pmm_done = false;
  for (const auto& m : report.methods) {
    if (!pmm_done && m.method != Method::Full) {
      os << std::left << std::setw(12) << "PMM" << std::right << std::setw(9) << "n/a"
         << std::setw(9) << "n/a" << std::setw(11) << "n/a" << std::setw(10) << "n/a"
         << std::setw(10) << "n/a" << std::setw(7) << "-" << std::setw(10) << "-" << "\n";
      pmm_done = true;
    }
    row(m);
  }
  for (const auto& m : report.methods) {
    if (m.coverage_trials > 0) {
      os << "coverage " << method_name(m.method) << " (95% jackknife CI): " << std::setprecision(1)
         << 100.0 * m.coverage_hits / m.coverage_trials << "% (" << m.coverage_hits << "/"
         << m.coverage_trials << ")\n";
    }
  }
  return os.str();
}

}  // namespace cgmm

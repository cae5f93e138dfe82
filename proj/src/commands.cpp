#include "cgmm/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "cgmm/errors.hpp"
#include "cgmm/gmm_baseline.hpp"
#include "cgmm/imputation.hpp"
#include "cgmm/io.hpp"
#include "cgmm/sim.hpp"

namespace cgmm {

namespace {

using nlohmann::json;

const std::vector<std::string> kCommands{"fit", "impute", "select-g", "cv", "jackknife", "simulate", "generate"};

std::vector<int> g_values(const RunConfig& cfg) {
  if (cfg.g > 0) return {cfg.g};
  std::vector<int> out;
  for (int g = 1; g <= cfg.g_max; ++g) out.push_back(g);
  return out;
}

LoadedData load_data(const RunConfig& cfg, std::ostream& log) {
  if (cfg.data.empty()) throw UsageError("--data is required for '" + cfg.command + "'");
  LoadedData d = load_csv(cfg.data);
  const double rate = static_cast<double>(d.data.missing_count()) /
                      static_cast<double>(d.data.y.size());
  log << "info: loaded " << d.data.n() << " rows (q=" << d.data.q() << ", p=" << d.data.p()
      << "), missing rate " << std::fixed << std::setprecision(1) << 100.0 * rate << "%\n"
      << std::defaultfloat;
  return d;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write '" + path + "'");
  f.precision(17);
  return f;
}

std::string sibling_path(const std::string& path, const std::string& suffix) {
  const auto slash = path.find_last_of('/');
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + suffix;
  return path.substr(0, dot) + suffix + path.substr(dot);
}

void print_warnings(const FitReport& r, std::ostream& log) {
  for (const auto& w : r.warnings) log << "warning: " << w << "\n";
}

// Fitted CGMM for commands that need one: the --params file if given,
// a penalized fit if --lambda is set, otherwise EM with BIC over G.
FitReport obtain_fit(const RunConfig& cfg, const Dataset& data, std::ostream& log) {
  if (!cfg.params.empty()) {
    FitReport r;
    r.params = params_from_json(load_json(cfg.params));
    try {
      r.params.design.validate(data.q());
    } catch (const Error&) {
      throw DataError("params design does not match the data's " + std::to_string(data.q()) + " covariates");
    }
    if (r.params.p() != data.p()) throw DataError("params response dimension does not match the data");
    r.loglik_trace.push_back(observed_loglik(data, r.params));
    r.bic = bic(r, data.n());
    return r;
  }
  const FitConfig fc = cfg.fit_config();
  if (cfg.lambda) {
    if (data.p() != 1) throw UsageError("--lambda needs a single response column");
    FitConfig c = fc;
    if (cfg.g == 0) {
      c.G = select_g_penalized(data, fc, cfg.penalty_config(), g_values(cfg)).best_g;
    } else {
      c.G = cfg.g;
    }
    return fit_penalized_em(data, c, cfg.penalty_config(), *cfg.lambda).report;
  }
  const Selection sel = select_g(data, cfg.design(data.q()), fc, g_values(cfg));
  if (cfg.g == 0) log << "info: BIC selected G=" << sel.best_g << "\n";
  return sel.best();
}

void write_summary(const FitReport& r, Index n, std::ostream& out) {
  const CgmmParams& p = r.params;
  out << "G = " << p.G() << ", loglik = " << std::setprecision(10) << r.loglik()
      << ", BIC = " << r.bic << ", iterations = " << r.n_iter
      << (r.converged ? "" : " (not converged)") << ", n = " << n << "\n";
  out << std::setprecision(6);
  for (Index g = 0; g < p.G(); ++g) {
    out << "component " << g + 1 << "\n  gate:";
    for (Index k = 0; k < p.alpha.cols(); ++k) out << " " << p.alpha(g, k);
    out << "\n  B:";
    const Matrix& B = p.B[static_cast<std::size_t>(g)];
    for (Index r2 = 0; r2 < B.rows(); ++r2) {
      out << (r2 ? " |" : "");
      for (Index c = 0; c < B.cols(); ++c) out << " " << B(r2, c);
    }
    out << "\n  Sigma:";
    const Matrix& S = p.Sigma[static_cast<std::size_t>(g)];
    for (Index r2 = 0; r2 < S.rows(); ++r2) {
      out << (r2 ? " |" : "");
      for (Index c = 0; c < S.cols(); ++c) out << " " << S(r2, c);
    }
    out << "\n";
  }
  out << std::defaultfloat;
}

template <class T>
T get_key(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError(std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace

RunConfig default_config(const std::string& command) {
  if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end()) {
    throw UsageError("unknown command '" + command + "'");
  }
  RunConfig c;
  c.command = command;
  if (command == "fit") c.out = "params.json";
  if (command == "impute") c.out = "imputed.csv";
  if (command == "select-g") c.out = "select_g.csv";
  if (command == "cv") c.out = "cv.csv";
  if (command == "jackknife") c.out = "jackknife.csv";
  if (command == "generate") c.out = "data.csv";
  return c;
}

json RunConfig::to_json() const {
  json j;
  j["command"] = command;
  j["data"] = data;
  j["out"] = out;
  j["params"] = params;
  j["g"] = g;
  j["g_max"] = g_max;
  j["max_iter"] = max_iter;
  j["tol"] = tol;
  j["n_starts"] = n_starts;
  j["seed"] = seed;
  j["init"] = init;
  j["threads"] = threads;
  j["gate_cols"] = gate_cols;
  j["mean_cols"] = mean_cols;
  j["gate_intercept"] = gate_intercept;
  j["mean_intercept"] = mean_intercept;
  j["lambda"] = lambda ? json(*lambda) : json(nullptr);
  j["lambda_grid"] = lambda_grid;
  j["folds"] = folds;
  j["selection_lambda"] = selection_lambda;
  j["cd_max_cycles"] = cd_max_cycles;
  j["cd_tol"] = cd_tol;
  j["model"] = model;
  j["n"] = n;
  j["N"] = N;
  j["q"] = q;
  j["reps"] = reps;
  j["methods"] = methods;
  j["coverage"] = coverage;
  j["groups"] = groups;
  j["jackknife_max_iter"] = jackknife_max_iter;
  j["estimator"] = estimator;
  j["column"] = column;
  return j;
}

RunConfig RunConfig::from_json(const json& j, const std::string& command) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  std::string cmd = command;
  if (j.contains("command")) {
    const auto from_file = get_key<std::string>(j, "command");
    if (!cmd.empty() && from_file != cmd) {
      throw UsageError("config is for command '" + from_file + "', not '" + cmd + "'");
    }
    cmd = from_file;
  }
  if (cmd.empty()) throw UsageError("config does not name a command");
  json merged = default_config(cmd).to_json();
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!merged.contains(it.key())) throw UsageError("unknown config key '" + it.key() + "'");
    merged[it.key()] = it.value();
  }
  RunConfig c;
  c.command = cmd;
  c.data = get_key<std::string>(merged, "data");
  c.out = get_key<std::string>(merged, "out");
  c.params = get_key<std::string>(merged, "params");
  c.g = get_key<int>(merged, "g");
  c.g_max = get_key<int>(merged, "g_max");
  c.max_iter = get_key<int>(merged, "max_iter");
  c.tol = get_key<double>(merged, "tol");
  c.n_starts = get_key<int>(merged, "n_starts");
  c.seed = get_key<std::uint64_t>(merged, "seed");
  c.init = get_key<std::string>(merged, "init");
  c.threads = get_key<int>(merged, "threads");
  c.gate_cols = get_key<std::vector<int>>(merged, "gate_cols");
  c.mean_cols = get_key<std::vector<int>>(merged, "mean_cols");
  c.gate_intercept = get_key<bool>(merged, "gate_intercept");
  c.mean_intercept = get_key<bool>(merged, "mean_intercept");
  if (!merged["lambda"].is_null()) c.lambda = get_key<double>(merged, "lambda");
  c.lambda_grid = get_key<std::vector<double>>(merged, "lambda_grid");
  c.folds = get_key<int>(merged, "folds");
  c.selection_lambda = get_key<double>(merged, "selection_lambda");
  c.cd_max_cycles = get_key<int>(merged, "cd_max_cycles");
  c.cd_tol = get_key<double>(merged, "cd_tol");
  c.model = get_key<std::string>(merged, "model");
  c.n = get_key<Index>(merged, "n");
  c.N = get_key<Index>(merged, "N");
  c.q = get_key<Index>(merged, "q");
  c.reps = get_key<int>(merged, "reps");
  c.methods = get_key<std::vector<std::string>>(merged, "methods");
  c.coverage = get_key<bool>(merged, "coverage");
  c.groups = get_key<int>(merged, "groups");
  c.jackknife_max_iter = get_key<int>(merged, "jackknife_max_iter");
  c.estimator = get_key<std::string>(merged, "estimator");
  c.column = get_key<int>(merged, "column");
  return c;
}

FitConfig RunConfig::fit_config() const {
  FitConfig f;
  f.G = std::max(g, 1);
  f.max_iter = max_iter;
  f.tol = tol;
  f.n_starts = n_starts;
  f.seed = seed;
  f.threads = threads;
  if (init == "kmeans") {
    f.init = InitMethod::kmeans;
  } else if (init == "random") {
    f.init = InitMethod::random_responsibility;
  } else {
    throw UsageError("unknown init '" + init + "' (expected kmeans or random)");
  }
  if (g < 0) throw UsageError("g must be nonnegative");
  if (g == 0 && g_max < 1) throw UsageError("g_max must be at least 1");
  f.validate();
  return f;
}

PenaltyConfig RunConfig::penalty_config() const {
  PenaltyConfig p;
  if (!lambda_grid.empty()) p.lambda_grid = lambda_grid;
  p.cv_folds = folds;
  p.selection_lambda = selection_lambda;
  p.inner_cd_iter = cd_max_cycles;
  p.cd_tol = cd_tol;
  p.validate();
  return p;
}

DesignSpec RunConfig::design(Index q_data) const {
  DesignSpec d = DesignSpec::full(q_data);
  auto convert = [&](const std::vector<int>& cols, IndexList& target, const char* what) {
    if (cols.empty()) return;
    target.clear();
    for (int c : cols) {
      if (c < 1 || c > q_data) {
        throw UsageError(std::string(what) + " column " + std::to_string(c) + " outside 1.." +
                         std::to_string(q_data));
      }
      target.push_back(c - 1);
    }
  };
  convert(gate_cols, d.gate_covariates, "gate");
  convert(mean_cols, d.mean_covariates, "mean");
  d.gate_intercept = gate_intercept;
  d.mean_intercept = mean_intercept;
  try {
    d.validate(q_data);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return d;
}

MonteCarloOptions RunConfig::monte_carlo_options() const {
  MonteCarloOptions m;
  m.reps = reps;
  m.seed = seed;
  m.g_max = g_max;
  m.fit = fit_config();
  m.pen = penalty_config();
  m.coverage = coverage;
  m.jackknife_groups = groups;
  m.jackknife_max_iter = jackknife_max_iter;
  m.threads = threads;
  m.validate();
  return m;
}

SimModelSpec RunConfig::sim_spec() const {
  SimModelSpec s;
  s.model = parse_sim_model(model);
  s.n = n;
  s.N = N;
  s.q = q;
  s.seed = seed;
  s.validate();
  return s;
}

int cmd_fit(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const LoadedData d = load_data(cfg, log);
  const FitReport r = obtain_fit(cfg, d.data, log);
  print_warnings(r, log);
  save_json(cfg.out, params_to_json(r.params, &r));
  write_summary(r, d.data.n(), out);
  return 0;
}

int cmd_impute(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const LoadedData d = load_data(cfg, log);
  const FitReport r = obtain_fit(cfg, d.data, log);
  print_warnings(r, log);
  const ImputationResult res = impute(d.data, r.params);
  Dataset completed = d.data;
  completed.y = res.y_imputed;
  completed.delta.setConstant(true);
  save_csv(cfg.out, completed, d.x_names, d.y_names);
  const std::string frac = sibling_path(cfg.out, "_fractional");
  std::ofstream f = open_out(frac);
  write_fractional_csv(f, res, d.y_names);
  out << "imputed " << d.data.missing_count() << " cells with G=" << r.params.G() << "; wrote "
      << cfg.out << " and " << frac << "\n";
  return 0;
}

int cmd_select_g(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const LoadedData d = load_data(cfg, log);
  std::vector<int> range;
  for (int g = 1; g <= cfg.g_max; ++g) range.push_back(g);
  const Selection sel = select_g(d.data, cfg.design(d.data.q()), cfg.fit_config(), range);
  std::ofstream f = open_out(cfg.out);
  f << "G,loglik,bic,converged,error\n";
  for (const auto& fit : sel.fits) {
    if (fit.report) {
      f << fit.G << "," << fit.report->loglik() << "," << fit.report->bic << ","
        << (fit.report->converged ? 1 : 0) << ",\n";
    } else {
      std::string e = fit.error;
      std::replace(e.begin(), e.end(), ',', ';');
      f << fit.G << ",,,0," << e << "\n";
    }
  }
  out << "selected G = " << sel.best_g << "\n";
  return 0;
}

int cmd_cv(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const LoadedData d = load_data(cfg, log);
  if (d.data.p() != 1) throw UsageError("cv needs a single response column");
  FitConfig fc = cfg.fit_config();
  const PenaltyConfig pen = cfg.penalty_config();
  if (cfg.g == 0) {
    fc.G = select_g_penalized(d.data, fc, pen, g_values(cfg)).best_g;
    log << "info: BIC at lambda=" << pen.selection_lambda << " selected G=" << fc.G << "\n";
  }
  const CvResult cv = cv_select_lambda(d.data, fc, pen);
  for (const auto& w : cv.warnings) log << "warning: " << w << "\n";
  std::ofstream f = open_out(cfg.out);
  f << "lambda,cv_error,cv_se\n";
  for (std::size_t l = 0; l < cv.lambdas.size(); ++l) {
    f << cv.lambdas[l] << "," << cv.cv_error[l] << "," << cv.cv_se[l] << "\n";
  }
  out << "G = " << fc.G << ", folds = " << cv.folds << ", selected lambda = "
      << std::setprecision(10) << cv.best_lambda << "\n";
  return 0;
}

int cmd_jackknife(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const LoadedData d = load_data(cfg, log);
  if (cfg.column < 1 || cfg.column > d.data.p()) throw UsageError("column outside 1..p");
  const FitReport r = obtain_fit(cfg, d.data, log);
  FitConfig jk = cfg.fit_config();
  jk.max_iter = cfg.jackknife_max_iter;
  jk.n_starts = 1;
  jk.threads = 1;
  Estimator est;
  std::vector<std::string> labels;
  if (cfg.estimator == "summary") {
    est = summary_estimator(cfg.column - 1);
    labels = {"Q1", "median", "mean", "Q3"};
  } else if (cfg.estimator == "mean") {
    est = mean_estimator();
    labels = d.y_names;
  } else {
    throw UsageError("unknown estimator '" + cfg.estimator + "' (expected summary or mean)");
  }
  const JackknifeReport rep =
      jackknife(d.data, warm_start_pipeline(r.params, jk, est), cfg.groups, cfg.seed, cfg.threads);
  std::ofstream f = open_out(cfg.out);
  f << "statistic,estimate,variance,ci_lower,ci_upper\n";
  out << "G = " << r.params.G() << ", " << rep.n_groups << " jackknife groups\n";
  out << std::left << std::setw(10) << "statistic" << std::right << std::setw(16) << "estimate"
      << std::setw(30) << "95% CI" << "\n";
  out << std::fixed << std::setprecision(4);
  for (Index k = 0; k < rep.point.size(); ++k) {
    const std::string& name = labels[static_cast<std::size_t>(k)];
    f << name << "," << rep.point(k) << "," << rep.variance(k) << "," << rep.ci_lower(k) << ","
      << rep.ci_upper(k) << "\n";
    std::ostringstream ci;
    ci << std::fixed << std::setprecision(4) << "(" << rep.ci_lower(k) << ", " << rep.ci_upper(k) << ")";
    out << std::left << std::setw(10) << name << std::right << std::setw(16) << rep.point(k)
        << std::setw(30) << ci.str() << "\n";
  }
  out << std::defaultfloat;
  return 0;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  std::vector<Method> methods;
  for (const auto& m : cfg.methods) methods.push_back(parse_method(m));
  const MonteCarloReport rep = monte_carlo(cfg.sim_spec(), methods, cfg.monte_carlo_options());
  const std::string text = format_report(rep);
  out << text;
  if (!cfg.out.empty()) {
    std::ofstream f = open_out(cfg.out);
    f << text;
  }
  return 0;
}

int cmd_generate(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const SimData sim = generate(cfg.sim_spec());
  save_csv(cfg.out, sim.sample, sim.x_names, sim.y_names);
  Dataset truth = sim.sample;
  truth.y = sim.y_full;
  truth.delta.setConstant(true);
  const std::string truth_path = sibling_path(cfg.out, "_truth");
  save_csv(truth_path, truth, sim.x_names, sim.y_names);
  out << "wrote " << sim.sample.n() << " rows to " << cfg.out << " (complete responses in "
      << truth_path << "); population mean " << std::setprecision(10) << sim.theta << "\n";
  return 0;
}

namespace {

// Binds a CLI option to a config key; only options given on the command
// line are written into the override object.
class Overrides {
 public:
  explicit Overrides(CLI::App* app) : app_(app) {}

  template <class T>
  CLI::Option* option(const std::string& flag, const std::string& key, const std::string& help) {
    auto holder = std::make_shared<T>();
    CLI::Option* opt = app_->add_option(flag, *holder, help);
    apply_.push_back([opt, holder, key](json& j) {
      if (opt->count() > 0) j[key] = *holder;
    });
    return opt;
  }

  void flag(const std::string& flag, const std::string& key, bool value, const std::string& help) {
    CLI::Option* opt = app_->add_flag(flag, help);
    apply_.push_back([opt, key, value](json& j) {
      if (opt->count() > 0) j[key] = value;
    });
  }

  json collect() const {
    json j = json::object();
    for (const auto& f : apply_) f(j);
    return j;
  }

 private:
  CLI::App* app_;
  std::vector<std::function<void(json&)>> apply_;
};

struct Subcommand {
  CLI::App* app = nullptr;
  std::unique_ptr<Overrides> overrides;
  std::string config_path;
  bool print_config = false;
};

void add_fit_options(Overrides& o) {
  o.option<int>("--g", "g", "number of components (0: choose by BIC over 1..g-max)");
  o.option<int>("--g-max", "g_max", "largest G considered by BIC");
  o.option<int>("--max-iter", "max_iter", "EM iteration cap");
  o.option<double>("--tol", "tol", "relative log-likelihood convergence tolerance");
  o.option<int>("--starts", "n_starts", "random restarts per fit");
  o.option<std::string>("--init", "init", "initialization: kmeans or random");
  o.option<std::vector<int>>("--gate-cols", "gate_cols", "1-based covariates in the gate")->delimiter(',');
  o.option<std::vector<int>>("--mean-cols", "mean_cols", "1-based covariates in the expert means")->delimiter(',');
  o.flag("--no-gate-intercept", "gate_intercept", false, "drop the gate intercept");
  o.flag("--no-mean-intercept", "mean_intercept", false, "drop the expert-mean intercept");
}

void add_penalty_options(Overrides& o) {
  o.option<double>("--lambda", "lambda", "lasso penalty (scalar y only)");
  o.option<std::vector<double>>("--lambda-grid", "lambda_grid", "comma-separated lambda values")->delimiter(',');
  o.option<int>("--folds", "folds", "cross-validation folds");
  o.option<double>("--selection-lambda", "selection_lambda", "penalty used when choosing G by BIC");
}

void add_sim_options(Overrides& o) {
  o.option<std::string>("--model", "model", "data-generating model M1..M7");
  o.option<Index>("--n", "n", "sample size");
  o.option<Index>("--N", "N", "population size");
  o.option<Index>("--q", "q", "covariate count for M5/M6");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conditional Gaussian mixture models: EM fitting, fractional imputation, "
               "penalized fits and simulation benchmarks"};
  app.require_subcommand(1);
  std::map<std::string, Subcommand> subs;
  const std::map<std::string, std::string> help{
      {"fit", "fit a CGMM and write its parameters as JSON"},
      {"impute", "impute missing responses (completed and fractional CSVs)"},
      {"select-g", "BIC table over G = 1..g-max"},
      {"cv", "cross-validated lambda for the penalized CGMM"},
      {"jackknife", "point estimates and jackknife 95% CIs"},
      {"simulate", "Monte Carlo comparison on a simulation model"},
      {"generate", "write one simulated sample as CSV"}};
  for (const auto& name : kCommands) {
    Subcommand& s = subs[name];
    s.app = app.add_subcommand(name, help.at(name));
    s.overrides = std::make_unique<Overrides>(s.app);
    Overrides& o = *s.overrides;
    s.app->add_option("--config", s.config_path, "JSON run configuration");
    s.app->add_flag("--print-config", s.print_config, "print the effective configuration and exit");
    o.option<std::string>("--out", "out", "output path");
    o.option<std::uint64_t>("--seed", "seed", "random seed");
    o.option<int>("--threads", "threads", "worker threads");
    if (name != "simulate" && name != "generate") {
      o.option<std::string>("--data", "data", "input CSV (x... covariates, y... responses)");
      add_fit_options(o);
    }
    if (name == "impute" || name == "jackknife" || name == "fit") {
      o.option<std::string>("--params", "params", "params JSON to use instead of fitting");
    }
    if (name == "fit" || name == "impute" || name == "jackknife" || name == "cv") add_penalty_options(o);
    if (name == "jackknife") {
      o.option<int>("--groups", "groups", "jackknife groups");
      o.option<std::string>("--estimator", "estimator", "summary (quartiles and mean) or mean");
      o.option<int>("--column", "column", "1-based response column for the summary estimator");
      o.option<int>("--jackknife-max-iter", "jackknife_max_iter", "EM iterations per replicate refit");
    }
    if (name == "simulate" || name == "generate") add_sim_options(o);
    if (name == "simulate") {
      add_fit_options(o);
      add_penalty_options(o);
      o.option<int>("--reps", "reps", "Monte Carlo replicates");
      o.option<std::vector<std::string>>("--methods", "methods", "full, gmm, cgmm, cgmm-lasso")->delimiter(',');
      o.flag("--coverage", "coverage", true, "jackknife coverage of the CGMM mean");
      o.option<int>("--groups", "groups", "jackknife groups for --coverage");
      o.option<int>("--jackknife-max-iter", "jackknife_max_iter", "EM iterations per replicate refit");
    }
  }

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
      throw UsageError(e.what());
    }
    for (auto& [name, s] : subs) {
      if (!s.app->parsed()) continue;
      json j = json::object();
      if (!s.config_path.empty()) {
        try {
          j = load_json(s.config_path);
        } catch (const DataError& e) {
          throw UsageError(e.what());
        }
        if (!j.is_object()) throw UsageError("config must be a JSON object");
      }
      const json overrides = s.overrides->collect();
      for (const auto& [k, v] : overrides.items()) j[k] = v;
      const RunConfig cfg = RunConfig::from_json(j, name);
      if (s.print_config) {
        out << cfg.to_json().dump(2) << "\n";
        return 0;
      }
      if (name == "fit") return cmd_fit(cfg, out, err);
      if (name == "impute") return cmd_impute(cfg, out, err);
      if (name == "select-g") return cmd_select_g(cfg, out, err);
      if (name == "cv") return cmd_cv(cfg, out, err);
      if (name == "jackknife") return cmd_jackknife(cfg, out, err);
      if (name == "simulate") return cmd_simulate(cfg, out, err);
      if (name == "generate") return cmd_generate(cfg, out, err);
    }
    throw UsageError("no command given");
  } catch (const UsageError& e) {
    err << "error: usage: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    err << "error: data: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    err << "error: numerical: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: numerical: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace cgmm

#include "survenet/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "survenet/evaluation.hpp"
#include "survenet/model_selection.hpp"
#include "survenet/simulation.hpp"

#ifndef SURVENET_VERSION
#define SURVENET_VERSION "0.0.0"
#endif

namespace survenet {

namespace {

using Json = nlohmann::ordered_json;

struct Flags {
  std::string method = "aenet";
  std::string input;
  std::string output;
  std::string config;
  std::string test;
  std::string km_output;
  std::string screened_output;
  std::string design_output;
  std::string weight_mode = "auto";
  std::string lambda2_grid, lambda0_grid, t1_grid;
  std::uint64_t seed = 1;
  int folds = 5;
  double gamma = 1.0;
  double varsigma = kDefaultVarsigma;
  int bootstrap_b = kDefaultBootstrapB;
  bool cv_refit_weights = false;
  bool timing = false;
  // simulate
  int sim = 1;
  std::string model = "lognormal";
  double rho = 0.0;
  double censoring = 30.0;
  long n = 0;
  int replicates = 0;
  // screen
  long sis_dn = 0;
};

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (used == 0 || used != item.size()) throw InputError(flag + ": cannot parse '" + item + "' as a number");
    values.push_back(v);
  }
  if (values.empty()) throw InputError(flag + ": empty list");
  return values;
}

std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(path);
  if (!file) throw InputError("cannot write '" + path + "'");
  file << text;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// Non-finite numbers are not JSON; they become null.
Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json number_list(const Vector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

Json number_list(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

std::vector<std::string> covariate_names(const SurvivalDataset& d) {
  if (static_cast<Index>(d.names.size()) == d.p()) return d.names;
  std::vector<std::string> names;
  for (Index j = 0; j < d.p(); ++j) names.push_back("x" + std::to_string(j + 1));
  return names;
}

Json named(const Vector& v, const std::vector<std::string>& names) {
  Json o = Json::object();
  for (Index j = 0; j < v.size(); ++j) o[names[static_cast<std::size_t>(j)]] = number(v(j));
  return o;
}

Json name_list(const IndexSet& idx, const std::vector<std::string>& names) {
  Json a = Json::array();
  for (Index j : idx) a.push_back(names[static_cast<std::size_t>(j)]);
  return a;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void add_input(CLI::App* cmd, Flags& f, bool required = true) {
  auto* opt = cmd->add_option("--input", f.input, "Survival CSV with columns time, status and covariates");
  if (required) opt->required();
}

void add_output(CLI::App* cmd, Flags& f) {
  cmd->add_option("--output", f.output, "Output file (default: standard output)");
  cmd->add_flag("--timing", f.timing, "Record wall time in the output (breaks byte-identical reruns)");
}

void add_tuning(CLI::App* cmd, Flags& f) {
  cmd->add_option("--method", f.method, "enet, aenet, aenetcc, wenet or wenetcc (simulate: comma-separated list)")
      ->capture_default_str();
  cmd->add_option("--seed", f.seed, "Seed for folds and bootstrap")->capture_default_str();
  cmd->add_option("--folds", f.folds, "Cross-validation folds K")->capture_default_str();
  cmd->add_option("--gamma", f.gamma, "Adaptive weight exponent")->capture_default_str();
  cmd->add_option("--varsigma", f.varsigma, "Selection threshold for constrained methods")->capture_default_str();
  cmd->add_option("--lambda2-grid", f.lambda2_grid, "Comma-separated ridge grid (default 0,0.6,...,5.0)");
  cmd->add_option("--lambda0-grid", f.lambda0_grid, "Comma-separated constraint penalty grid (default 1.0,...,3.0)");
  cmd->add_option("--t1-grid", f.t1_grid, "Comma-separated l1 fractions (default 0,0.05,...,1)");
  cmd->add_option("--bootstrap-B", f.bootstrap_b, "Bootstrap replicates")->capture_default_str();
  cmd->add_option("--weight-mode", f.weight_mode, "WEnet weights: auto, gehan_se or bootstrap_se")
      ->capture_default_str();
  cmd->add_flag("--cv-refit-weights", f.cv_refit_weights, "Re-estimate penalty weights inside every fold");
  cmd->add_option("--config", f.config, "JSON file with grid settings; flags override it");
}

TuningGrid build_grid(const Flags& f, const CLI::App* cmd) {
  TuningGrid g;
  if (!f.config.empty()) g = parse_tuning_grid(read_text(f.config), g);
  auto given = [&](const char* name) { return cmd->count(name) > 0; };
  if (given("--lambda2-grid")) g.lambda2_grid = parse_list(f.lambda2_grid, "--lambda2-grid");
  if (given("--lambda0-grid")) g.lambda0_grid = parse_list(f.lambda0_grid, "--lambda0-grid");
  if (given("--t1-grid")) g.t1_grid = parse_list(f.t1_grid, "--t1-grid");
  if (given("--folds")) g.folds = f.folds;
  if (given("--gamma")) g.gamma = f.gamma;
  if (given("--varsigma")) g.varsigma = f.varsigma;
  if (given("--seed") || f.config.empty()) g.seed = f.seed;
  if (given("--cv-refit-weights")) g.cv_refit_weights = f.cv_refit_weights;
  g.validate();
  return g;
}

WeightOptions build_weight_options(const Flags& f, const TuningGrid& g) {
  if (f.bootstrap_b < 2) throw InputError("--bootstrap-B must be at least 2");
  WeightOptions w;
  w.mode = wenet_weight_mode_from_string(f.weight_mode);
  w.bootstrap_b = f.bootstrap_b;
  w.seed = derive_seed(g.seed, 7);
  return w;
}

Json grid_json(const TuningGrid& g) {
  Json j;
  j["lambda2_grid"] = number_list(g.lambda2_grid);
  j["lambda0_grid"] = number_list(g.lambda0_grid);
  j["t1_grid"] = number_list(g.t1_grid);
  j["folds"] = g.folds;
  j["gamma"] = g.gamma;
  j["varsigma"] = number(g.varsigma);
  j["seed"] = g.seed;
  j["cv_refit_weights"] = g.cv_refit_weights;
  return j;
}

Json tuning_flags(const Flags& f, const TuningGrid& g) {
  Json j;
  j["method"] = to_string(method_from_string(f.method));
  j["input"] = f.input;
  j["grid"] = grid_json(g);
  j["bootstrap_B"] = f.bootstrap_b;
  j["weight_mode"] = f.weight_mode;
  return j;
}

Json tuning_json(const TunedFit& t) {
  Json j;
  j["t1"] = t.t1;
  j["lambda2"] = t.lambda2;
  if (t.cc) {
    j["lambda0"] = t.cc->lambda0;
    j["budget"] = t.cc->budget;
  }
  return j;
}

Json fit_json(const TunedFit& t, const StandardizedData& s, const std::vector<std::string>& names) {
  Json j;
  j["method"] = to_string(t.method);
  j["n"] = s.n();
  j["p"] = s.p();
  j["events"] = s.n_uncensored();
  j["tuning"] = tuning_json(t);
  j["weights"] = {{"source", to_string(t.weights.source)}, {"values", named(t.weights.w, names)}};
  j["coefficients"] = named(t.fit.beta, names);
  j["intercept"] = t.fit.intercept;
  j["selected"] = name_list(t.fit.selected, names);
  if (t.fit.xi) j["xi"] = number_list(*t.fit.xi);
  if (t.fit.constraint_violation) j["constraint_violation"] = *t.fit.constraint_violation;
  j["cv_s"] = number(t.cv_s);
  j["aicc"] = t.aicc ? number(*t.aicc) : Json(nullptr);
  return j;
}

void merge(Json& into, const Json& from) {
  for (const auto& [k, v] : from.items()) into[k] = v;
}

struct Loaded {
  SurvivalDataset data;
  StandardizedData std_data;
  std::vector<std::string> names;
};

Loaded load(const std::string& path) {
  Loaded l;
  l.data = read_survival_csv(path);
  l.names = covariate_names(l.data);
  l.std_data = prepare(l.data);
  return l;
}

int cmd_fit(const Flags& f, const CLI::App* cmd, std::ostream& out, bool with_cv) {
  Stopwatch clock;
  const TuningGrid g = build_grid(f, cmd);
  const Method method = method_from_string(f.method);
  const Loaded in = load(f.input);
  const TunedFit t = fit_tuned(in.std_data, method, g, build_weight_options(f, g));
  Json j;
  j["command"] = with_cv ? "cv" : "fit";
  j["flags"] = tuning_flags(f, g);
  if (!with_cv) {
    merge(j, fit_json(t, in.std_data, in.names));
  } else {
    j["method"] = to_string(method);
    j["tuning"] = tuning_json(t);
    Json table = Json::array();
    for (Index l = 0; l < t.cv_table.rows(); ++l) table.push_back(number_list(Vector(t.cv_table.row(l).transpose())));
    j["cv_table"] = {{"rows", "lambda2_grid"}, {"cols", "t1_grid"}, {"cv_s", table}};
    if (t.cc) {
      Json scores = Json::array();
      for (const CCScore& sc : t.cc->scores)
        scores.push_back({{"lambda0", sc.lambda0},
                          {"predictors", name_list(sc.predictor_set, in.names)},
                          {"cv_s", number(sc.cv_s)},
                          {"aicc", number(sc.aicc)}});
      j["lambda0_scores"] = scores;
    }
    j["cv_s"] = number(t.cv_s);
    j["aicc"] = t.aicc ? number(*t.aicc) : Json(nullptr);
  }
  if (f.timing) j["wall_time_seconds"] = clock.seconds();
  emit(dump(j), f.output, out);
  return 0;
}

int cmd_bootstrap(const Flags& f, const CLI::App* cmd, std::ostream& out) {
  Stopwatch clock;
  const TuningGrid g = build_grid(f, cmd);
  const Method method = method_from_string(f.method);
  const Loaded in = load(f.input);
  const TunedFit t = fit_tuned(in.std_data, method, g, build_weight_options(f, g));
  std::optional<double> lambda0;
  if (t.cc) lambda0 = t.cc->lambda0;
  const BootstrapSummary b = bootstrap_632_variance(
      in.data,
      [&](const StandardizedData& s) {
        return refit_fixed(s, method, t.t1, t.lambda2, lambda0, t.weights, g.varsigma).beta;
      },
      f.bootstrap_b, derive_seed(g.seed, 11));
  Json j;
  j["command"] = "bootstrap";
  j["flags"] = tuning_flags(f, g);
  merge(j, fit_json(t, in.std_data, in.names));
  j["bootstrap"] = {{"B", b.b},
                    {"subsample_size", b.subsample_size},
                    {"redrawn", b.resamples},
                    {"variance", named(b.variance, in.names)},
                    {"sd", named(b.variance.cwiseSqrt(), in.names)}};
  if (f.timing) j["wall_time_seconds"] = clock.seconds();
  emit(dump(j), f.output, out);
  return 0;
}

int cmd_screen(const Flags& f, const CLI::App* cmd, std::ostream& out) {
  Stopwatch clock;
  const Loaded in = load(f.input);
  const Index d_n = cmd->count("--sis-dn") ? static_cast<Index>(f.sis_dn)
                                           : std::min(default_sis_dn(in.data.n()), in.data.p());
  const IndexSet keep = sis_screen(in.std_data, d_n);
  Json j;
  j["command"] = "screen";
  j["flags"] = {{"input", f.input}, {"sis_dn", d_n}};
  j["n"] = in.data.n();
  j["p"] = in.data.p();
  j["d_n"] = d_n;
  j["selected"] = name_list(keep, in.names);
  Json idx = Json::array();
  for (Index k : keep) idx.push_back(k);
  j["indices"] = idx;
  if (!f.screened_output.empty()) {
    IndexSet sorted = keep;
    std::sort(sorted.begin(), sorted.end());
    SurvivalDataset reduced = in.data;
    reduced.covariates = select_cols(in.data.covariates, sorted);
    reduced.names.clear();
    for (Index k : sorted) reduced.names.push_back(in.names[static_cast<std::size_t>(k)]);
    std::ostringstream csv;
    write_survival_csv(reduced, csv);
    emit(csv.str(), f.screened_output, out);
  }
  if (f.timing) j["wall_time_seconds"] = clock.seconds();
  emit(dump(j), f.output, out);
  return 0;
}

int cmd_evaluate(const Flags& f, const CLI::App* cmd, std::ostream& out) {
  Stopwatch clock;
  const TuningGrid g = build_grid(f, cmd);
  const Method method = method_from_string(f.method);
  const Loaded train = load(f.input);
  const TunedFit t = fit_tuned(train.std_data, method, g, build_weight_options(f, g));
  Json j;
  j["command"] = "evaluate";
  Json flags = tuning_flags(f, g);
  flags["test"] = f.test;
  j["flags"] = flags;
  merge(j, fit_json(t, train.std_data, train.names));
  j["mse_train"] = mse_train(train.std_data.source, t.fit.beta, t.fit.intercept);

  const SurvivalDataset test = f.test.empty() ? train.data : read_survival_csv(f.test);
  if (test.p() != train.data.p()) throw InputError("test data has a different number of covariates");
  j["evaluated_on"] = f.test.empty() ? "training data" : "test data";
  if (!f.test.empty()) j["mse_test"] = mse_test(test.covariates, test.times, t.fit.beta, t.fit.intercept);
  const RiskSplit split = risk_split(train.data.covariates, test.covariates, t.fit.beta);
  Json risk;
  risk["threshold"] = split.threshold;
  risk["degenerate"] = split.degenerate;
  risk["high_risk"] = std::count(split.high_risk.begin(), split.high_risk.end(), 1);
  risk["low_risk"] = std::count(split.high_risk.begin(), split.high_risk.end(), 0);
  if (!split.degenerate) {
    const LogRankResult lr = logrank_test(test.times, test.status, split.high_risk);
    risk["logrank"] = {{"statistic", lr.statistic},
                       {"p_value", lr.p_value},
                       {"observed", {lr.observed[0], lr.observed[1]}},
                       {"expected", {lr.expected[0], lr.expected[1]}}};
  }
  j["risk_groups"] = risk;
  if (!f.km_output.empty()) {
    std::ostringstream csv;
    write_km_curves_csv(csv, test.times.array().exp().matrix(), test.status, split.high_risk);
    emit(csv.str(), f.km_output, out);
  }
  if (f.timing) j["wall_time_seconds"] = clock.seconds();
  emit(dump(j), f.output, out);
  return 0;
}

int cmd_simulate(const Flags& f, const CLI::App* cmd, std::ostream& out) {
  Stopwatch clock;
  if (f.sim != 1 && f.sim != 2) throw InputError("--sim must be 1 or 2");
  const ErrorLaw law = error_law_from_string(f.model);
  SimDesign d = f.sim == 1 ? sim1_design(f.rho, law, f.censoring) : sim2_design(f.rho, law, f.censoring);
  if (cmd->count("--n")) d.n = static_cast<Index>(f.n);
  d.seed = f.seed;
  d.validate();
  const double c0 = calibrate_c0(d, d.target_censoring);

  Json design;
  design["command"] = "simulate";
  design["flags"] = {{"sim", f.sim},       {"model", f.model},        {"rho", f.rho},
                     {"censoring", f.censoring}, {"n", d.n},          {"seed", f.seed},
                     {"replicates", f.replicates}};
  design["design"] = {{"n", d.n},
                      {"p", d.p},
                      {"alpha", d.alpha},
                      {"sigma", d.sigma},
                      {"rho", d.rho},
                      {"error_law", to_string(d.error_law)},
                      {"target_censoring", d.target_censoring},
                      {"beta_true", number_list(d.beta_true)}};
  design["c0"] = c0;

  if (f.replicates <= 0) {
    const CensoredSample sample = simulate(d, c0);
    std::ostringstream csv;
    write_survival_csv(sample.data, csv);
    emit(csv.str(), f.output, out);
    design["censoring_rate"] = sample.censoring_rate;
  } else {
    const TuningGrid g = build_grid(f, cmd);
    const WeightOptions w = build_weight_options(f, g);
    std::vector<StudyMethod> methods;
    for (const std::string& name : split_names(f.method))
      methods.push_back(tuned_study_method(method_from_string(name), g, w));
    if (methods.empty()) throw InputError("--method: no methods given");
    const StudyResult r = selection_frequency_study(d, methods, f.replicates, f.seed);
    std::ostringstream csv;
    write_study_csv(csv, r);
    emit(csv.str(), f.output, out);
    design["mean_censoring"] = r.mean_censoring;
    Json per = Json::array();
    for (std::size_t m = 0; m < r.methods.size(); ++m) {
      Json fails = Json::array();
      for (const std::string& msg : r.failures[m]) fails.push_back(msg);
      per.push_back({{"method", r.methods[m]}, {"successes", r.successes[m]}, {"failures", fails}});
    }
    design["methods"] = per;
  }
  if (f.timing) design["wall_time_seconds"] = clock.seconds();
  if (!f.design_output.empty()) emit(dump(design), f.design_output, out);
  return 0;
}

}  // namespace

std::string version_string() { return std::string("survenet ") + SURVENET_VERSION; }

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Variable selection for accelerated failure time models on right-censored data", "survenet"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);
  Flags f;

  auto* fit = app.add_subcommand("fit", "Tune by cross-validation and fit one method; writes JSON");
  add_input(fit, f);
  add_output(fit, f);
  add_tuning(fit, f);

  auto* cv = app.add_subcommand("cv", "Report the cross-validation table and selected tuning values; writes JSON");
  add_input(cv, f);
  add_output(cv, f);
  add_tuning(cv, f);

  auto* boot = app.add_subcommand("bootstrap", "0.632 bootstrap variances at the tuned fit; writes JSON");
  add_input(boot, f);
  add_output(boot, f);
  add_tuning(boot, f);

  auto* screen = app.add_subcommand("screen", "Sure independence screening; writes JSON");
  add_input(screen, f);
  add_output(screen, f);
  screen->add_option("--sis-dn", f.sis_dn, "Covariates kept (default floor(3 n^(2/3)), at most p)");
  screen->add_option("--screened-output", f.screened_output, "Write the screened data set as CSV");

  auto* eval = app.add_subcommand("evaluate", "Fit, then report MSE, risk groups and a log-rank test; writes JSON");
  add_input(eval, f);
  add_output(eval, f);
  add_tuning(eval, f);
  eval->add_option("--test", f.test, "Test CSV (default: evaluate on the training data)");
  eval->add_option("--km-output", f.km_output, "Write Kaplan-Meier curves per risk group as CSV");

  auto* sim = app.add_subcommand("simulate", "Simulate a data set (CSV) or, with --replicates, a selection study (CSV)");
  add_output(sim, f);
  add_tuning(sim, f);
  sim->add_option("--sim", f.sim, "Design 1 (n=100, p=40) or 2 (n=100, p=120)")->capture_default_str();
  sim->add_option("--model", f.model, "Error law: lognormal or weibull")->capture_default_str();
  sim->add_option("--rho", f.rho, "Covariate correlation")->capture_default_str();
  sim->add_option("--censoring", f.censoring, "Target censoring percent")->capture_default_str();
  sim->add_option("--n", f.n, "Sample size override");
  sim->add_option("--replicates", f.replicates, "Run a selection-frequency study with this many replicates");
  sim->add_option("--design-output", f.design_output, "Write design, c0 and realised censoring as JSON");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : kExitInputError;
  }

  try {
    if (fit->parsed()) return cmd_fit(f, fit, out, false);
    if (cv->parsed()) return cmd_fit(f, cv, out, true);
    if (boot->parsed()) return cmd_bootstrap(f, boot, out);
    if (screen->parsed()) return cmd_screen(f, screen, out);
    if (eval->parsed()) return cmd_evaluate(f, eval, out);
    if (sim->parsed()) return cmd_simulate(f, sim, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << " (residual " << e.residual() << ")\n";
    return kExitSolverError;
  }
  return kExitInputError;
}

}  // namespace survenet

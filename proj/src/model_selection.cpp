#include "survenet/model_selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "json.hpp"
#include "survenet/parallel.hpp"

namespace survenet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Grid positions in increasing order of value, stable for equal values.
std::vector<std::size_t> ascending(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  return idx;
}

int fold_count(const std::vector<int>& fold_of) {
  int k = 0;
  for (int f : fold_of) k = std::max(k, f + 1);
  return k;
}

Method path_base(Method m) {
  if (m == Method::AEnetCC) return Method::AEnet;
  if (m == Method::WEnetCC) return Method::WEnet;
  return m;
}

FitResult constrained_fit(Method method, const StandardizedData& std_data, const AdaptiveWeights& w, double budget,
                          double lambda2, double lambda0, double varsigma, const QPSettings& settings) {
  return method == Method::AEnetCC ? aenetcc_fit(std_data, w, budget, lambda2, lambda0, varsigma, settings)
                                   : wenetcc_fit(std_data, w, budget, lambda2, lambda0, varsigma, settings);
}

AdaptiveWeights restrict_weights(const AdaptiveWeights& w, const IndexSet& cols) {
  AdaptiveWeights out = w;
  out.w = select_rows(w.w, cols);
  return out;
}

double cc_budget(const StandardizedData& std_data, Method method, double t1, double lambda2, const Vector& w) {
  if (!(t1 >= 0.0 && t1 <= 1.0)) throw InputError("t1 must lie in [0, 1]");
  PenalizedPath path(path_base(method), std_data.x_uncensored(), std_data.y_uncensored(), lambda2, w);
  return t1 * path.terminus_l1();
}

}  // namespace

std::vector<double> TuningGrid::default_t1_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 20; ++i) g.push_back(i / 20.0);
  return g;
}

void TuningGrid::validate() const {
  if (lambda2_grid.empty() || lambda0_grid.empty() || t1_grid.empty()) throw InputError("tuning grids must be nonempty");
  for (double v : lambda2_grid)
    if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("lambda2 grid values must be finite and nonnegative");
  for (double v : lambda0_grid)
    if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("lambda0 grid values must be finite and nonnegative");
  for (double v : t1_grid)
    if (!(v >= 0.0 && v <= 1.0)) throw InputError("t1 grid values must lie in [0, 1]");
  if (folds < 2) throw InputError("cross-validation needs at least two folds");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw InputError("gamma must be nonnegative");
  if (!(varsigma >= 0.0)) throw InputError("varsigma must be nonnegative");
}

TuningGrid parse_tuning_grid(const std::string& json_text, TuningGrid base) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("grid config: ") + e.what());
  }
  if (!j.is_object()) throw InputError("grid config must be a JSON object");
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& key = it.key();
      if (key == "lambda2_grid")
        base.lambda2_grid = it->get<std::vector<double>>();
      else if (key == "lambda0_grid")
        base.lambda0_grid = it->get<std::vector<double>>();
      else if (key == "t1_grid")
        base.t1_grid = it->get<std::vector<double>>();
      else if (key == "folds")
        base.folds = it->get<int>();
      else if (key == "gamma")
        base.gamma = it->get<double>();
      else if (key == "varsigma")
        base.varsigma = it->get<double>();
      else if (key == "seed")
        base.seed = it->get<std::uint64_t>();
      else if (key == "cv_refit_weights")
        base.cv_refit_weights = it->get<bool>();
      else
        throw InputError("grid config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("grid config: ") + e.what());
  }
  base.validate();
  return base;
}

std::string tuning_grid_to_json(const TuningGrid& grid) {
  nlohmann::json j;
  j["lambda2_grid"] = grid.lambda2_grid;
  j["lambda0_grid"] = grid.lambda0_grid;
  j["t1_grid"] = grid.t1_grid;
  j["folds"] = grid.folds;
  j["gamma"] = grid.gamma;
  j["varsigma"] = grid.varsigma;
  j["seed"] = grid.seed;
  j["cv_refit_weights"] = grid.cv_refit_weights;
  return j.dump(2);
}

std::vector<int> kfold_split(const StandardizedData& std_data, int folds, std::uint64_t seed) {
  if (folds < 2) throw InputError("cross-validation needs at least two folds");
  if (folds > std_data.n_uncensored()) throw InputError("impossible stratification: more folds than events");
  std::vector<int> fold_of(static_cast<std::size_t>(std_data.n()), 0);
  std::mt19937_64 rng(derive_seed(seed, 0x6b666f6c64ULL));
  std::size_t dealt = 0;
  for (IndexSet stratum : {std_data.uncensored_index, std_data.censored_index}) {
    std::shuffle(stratum.begin(), stratum.end(), rng);
    for (Index row : stratum) fold_of[static_cast<std::size_t>(row)] = static_cast<int>(dealt++ % folds);
  }
  return fold_of;
}

IndexSet training_rows(const std::vector<int>& fold_of, int f) {
  IndexSet rows;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] != f) rows.push_back(static_cast<Index>(i));
  return rows;
}

IndexSet fold_rows(const std::vector<int>& fold_of, int f) {
  IndexSet rows;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] == f) rows.push_back(static_cast<Index>(i));
  return rows;
}

double cv_score(const StandardizedData& std_data, const std::vector<int>& fold_of,
                const std::vector<Vector>& fold_betas) {
  const int k = fold_count(fold_of);
  if (static_cast<Index>(fold_of.size()) != std_data.n()) throw InputError("fold assignment length mismatch");
  if (k < 2) throw InputError("cross-validation needs at least two folds");
  if (static_cast<int>(fold_betas.size()) != k) throw InputError("one coefficient vector per fold is required");
  std::vector<int> events(static_cast<std::size_t>(k), 0);
  double total = 0.0;
  for (Index i : std_data.uncensored_index) {
    const int f = fold_of[static_cast<std::size_t>(i)];
    ++events[static_cast<std::size_t>(f)];
    const Vector& b = fold_betas[static_cast<std::size_t>(f)];
    if (b.size() != std_data.p()) throw InputError("fold coefficient length mismatch");
    const double r = std_data.y_std(i) - std_data.x_std.row(i).dot(b);
    total += r * r;
  }
  for (int e : events)
    if (e == 0) throw InputError("degenerate fold");
  return total;
}

double aicc_score(double cv_s, Index n_u, Index k) {
  if (k < 0 || k >= n_u - 1) throw InputError("score undefined");
  if (!(cv_s >= 0.0)) throw InputError("score undefined");
  if (cv_s == 0.0) return -kInf;
  const double nu = static_cast<double>(n_u);
  const double kk = static_cast<double>(k);
  return nu * std::log(cv_s) + 2.0 * kk * (nu / (nu - kk - 1.0));
}

PathTuning tune_path_method(const StandardizedData& std_data, Method method, const TuningGrid& grid,
                            const Vector& weights, const WeightRefit& refit) {
  grid.validate();
  if (is_constrained(method)) throw InputError("tune_path_method: constrained methods are tuned by select_cc_model");
  const int k = grid.folds;
  const std::vector<int> fold_of = kfold_split(std_data, k, grid.seed);
  const std::size_t nl = grid.lambda2_grid.size(), nt = grid.t1_grid.size();

  // contrib[(l * k + f) * nt + t]: held-out squared error of fold f
  std::vector<double> contrib(nl * static_cast<std::size_t>(k) * nt, 0.0);
  std::vector<StandardizedData> train(static_cast<std::size_t>(k));
  std::vector<Vector> fold_weights(static_cast<std::size_t>(k));
  for (int f = 0; f < k; ++f) train[static_cast<std::size_t>(f)] = std_data.subset(training_rows(fold_of, f));
  parallel_for(static_cast<std::size_t>(k), [&](std::size_t f) {
    fold_weights[f] = refit ? refit(train[f]) : weights;
  });

  parallel_for(nl * static_cast<std::size_t>(k), [&](std::size_t task) {
    const std::size_t l = task / static_cast<std::size_t>(k);
    const int f = static_cast<int>(task % static_cast<std::size_t>(k));
    const StandardizedData& tr = train[static_cast<std::size_t>(f)];
    PenalizedPath path(method, tr.x_uncensored(), tr.y_uncensored(), grid.lambda2_grid[l],
                       fold_weights[static_cast<std::size_t>(f)]);
    IndexSet held;
    for (Index i : std_data.uncensored_index)
      if (fold_of[static_cast<std::size_t>(i)] == f) held.push_back(i);
    const Matrix xh = select_rows(std_data.x_std, held);
    const Vector yh = select_rows(std_data.y_std, held);
    for (std::size_t t = 0; t < nt; ++t) {
      const Vector beta = path.make_fit(path.naive_at_fraction(grid.t1_grid[t]), nullptr).beta;
      contrib[task * nt + t] = (yh - xh * beta).squaredNorm();
    }
  });

  PathTuning out;
  out.cv_table = Matrix::Zero(static_cast<Index>(nl), static_cast<Index>(nt));
  for (std::size_t l = 0; l < nl; ++l)
    for (int f = 0; f < k; ++f)
      for (std::size_t t = 0; t < nt; ++t)
        out.cv_table(static_cast<Index>(l), static_cast<Index>(t)) +=
            contrib[(l * static_cast<std::size_t>(k) + static_cast<std::size_t>(f)) * nt + t];

  double best = kInf;
  std::size_t best_l = 0, best_t = 0;
  for (std::size_t t : ascending(grid.t1_grid)) {
    for (std::size_t l : ascending(grid.lambda2_grid)) {
      const double v = out.cv_table(static_cast<Index>(l), static_cast<Index>(t));
      if (v < best) {
        best = v;
        best_l = l;
        best_t = t;
      }
    }
  }
  out.t1 = grid.t1_grid[best_t];
  out.lambda2 = grid.lambda2_grid[best_l];
  out.cv_s = best;
  out.fit = fit_path_method_at_fraction(std_data, method, out.t1, out.lambda2, weights);
  return out;
}

CCSelection select_cc_model(const StandardizedData& std_data, Method method, double t1, double lambda2,
                            const TuningGrid& grid, const AdaptiveWeights& weights, const QPSettings& settings) {
  grid.validate();
  if (!is_constrained(method)) throw InputError("select_cc_model needs AEnetCC or WEnetCC");
  const Index p = std_data.p();
  const Index n_u = std_data.n_uncensored();
  const int k = grid.folds;
  const double budget = cc_budget(std_data, method, t1, lambda2, weights.w);
  const std::vector<int> fold_of = kfold_split(std_data, k, grid.seed);
  const std::vector<std::size_t> order = ascending(grid.lambda0_grid);
  const std::size_t nl = order.size();

  std::vector<FitResult> full(nl);
  parallel_for(nl, [&](std::size_t i) {
    full[i] = constrained_fit(method, std_data, weights, budget, lambda2, grid.lambda0_grid[order[i]], grid.varsigma,
                              settings);
  });

  std::vector<IndexSet> ps(nl);
  std::vector<StandardizedData> restricted(nl);
  for (std::size_t i = 0; i < nl; ++i) {
    ps[i] = thresholded_support(full[i].beta, grid.varsigma);
    if (!ps[i].empty()) restricted[i] = std_data.restrict_columns(ps[i]);
  }

  std::vector<Vector> fold_beta(nl * static_cast<std::size_t>(k));
  parallel_for(nl * static_cast<std::size_t>(k), [&](std::size_t task) {
    const std::size_t i = task / static_cast<std::size_t>(k);
    const int f = static_cast<int>(task % static_cast<std::size_t>(k));
    if (ps[i].empty()) {
      fold_beta[task] = Vector::Zero(0);
      return;
    }
    const StandardizedData train = restricted[i].subset(training_rows(fold_of, f));
    fold_beta[task] = constrained_fit(method, train, restrict_weights(weights, ps[i]), budget, lambda2,
                                      grid.lambda0_grid[order[i]], grid.varsigma, settings)
                          .beta;
  });

  CCSelection out;
  out.budget = budget;
  double best = kInf;
  std::size_t best_i = 0;
  std::vector<Vector> averaged(nl);
  for (std::size_t i = 0; i < nl; ++i) {
    CCScore score;
    score.lambda0 = grid.lambda0_grid[order[i]];
    score.predictor_set = ps[i];
    const Index kk = static_cast<Index>(ps[i].size());
    averaged[i] = Vector::Zero(p);
    if (kk == 0) {
      score.cv_s = cv_score(std_data, fold_of, std::vector<Vector>(static_cast<std::size_t>(k), Vector::Zero(p)));
    } else {
      std::vector<Vector> betas(fold_beta.begin() + static_cast<std::ptrdiff_t>(i * k),
                                fold_beta.begin() + static_cast<std::ptrdiff_t>((i + 1) * k));
      score.cv_s = cv_score(restricted[i], fold_of, betas);
      Vector mean = Vector::Zero(kk);
      for (const Vector& b : betas) mean += b;
      mean /= static_cast<double>(k);
      for (Index a = 0; a < kk; ++a) averaged[i](ps[i][static_cast<std::size_t>(a)]) = mean(a);
    }
    score.aicc = kk < n_u - 1 ? aicc_score(score.cv_s, n_u, kk) : kInf;
    if (i == 0 || score.aicc < best) {
      best = score.aicc;
      best_i = i;
    }
    out.scores.push_back(score);
  }

  const double l0 = grid.lambda0_grid[order[best_i]];
  out.lambda0 = l0;
  out.cv_s = out.scores[best_i].cv_s;
  out.aicc = out.scores[best_i].aicc;

  FitResult fit;
  fit.method = method;
  fit.lambda2 = lambda2;
  fit.t1 = budget;
  fit.lambda0 = l0;
  fit.penalty_weights = weights.w;
  fit.beta = averaged[best_i];
  fit.beta_naive = fit.beta / (1.0 + lambda2);
  if (method == Method::AEnetCC) {
    fit.output_scale = 1.0 + lambda2;
    fit.beta_starred = fit.beta_naive;
  } else {
    fit.output_scale = std::sqrt(1.0 + lambda2);
    fit.beta_starred = fit.output_scale * fit.beta_naive;
  }
  fit.intercept = recover_intercept(fit.beta, std_data);
  fit.selected = thresholded_support(fit.beta, grid.varsigma);
  Vector xi = Vector::Zero(std_data.n_censored());
  if (std_data.n_censored() > 0) xi = (std_data.y_censored - std_data.x_censored * fit.beta_naive).cwiseMax(0.0);
  fit.xi = xi;
  fit.constraint_violation = 0.0;
  fit.solver_residual = full[best_i].solver_residual;
  out.fit = std::move(fit);
  return out;
}

AdaptiveWeights adaptive_weights_from_enet(const StandardizedData& std_data, const TuningGrid& grid) {
  TuningGrid g = grid;
  g.cv_refit_weights = false;
  const PathTuning enet = tune_path_method(std_data, Method::Enet, g, Vector::Ones(std_data.p()));
  return adaptive_weights(enet.fit.beta, grid.gamma);
}

std::string to_string(WenetWeightMode m) {
  switch (m) {
    case WenetWeightMode::Auto: return "auto";
    case WenetWeightMode::GehanSe: return "gehan_se";
    case WenetWeightMode::BootstrapSe: return "bootstrap_se";
  }
  return "auto";
}

WenetWeightMode wenet_weight_mode_from_string(const std::string& name) {
  if (name == "auto") return WenetWeightMode::Auto;
  if (name == "gehan_se") return WenetWeightMode::GehanSe;
  if (name == "bootstrap_se") return WenetWeightMode::BootstrapSe;
  throw InputError("unknown weight mode '" + name + "' (expected auto, gehan_se or bootstrap_se)");
}

AdaptiveWeights wenet_weights(const StandardizedData& std_data, const TuningGrid& grid, const WeightOptions& options) {
  WenetWeightMode mode = options.mode;
  if (mode == WenetWeightMode::Auto)
    mode = std_data.n_uncensored() > std_data.p() ? WenetWeightMode::GehanSe : WenetWeightMode::BootstrapSe;
  if (mode == WenetWeightMode::GehanSe) return wenet_weights_gehan(std_data.source, options.bootstrap_b, options.seed);
  TuningGrid g = grid;
  g.cv_refit_weights = false;
  const PathTuning enet = tune_path_method(std_data, Method::Enet, g, Vector::Ones(std_data.p()));
  return wenet_weights_bootstrap(std_data, enet.t1, enet.lambda2, options.bootstrap_b, options.seed);
}

TunedFit fit_tuned(const StandardizedData& std_data, Method method, const TuningGrid& grid,
                   const WeightOptions& weight_options, const QPSettings& settings) {
  grid.validate();
  TunedFit out;
  out.method = method;
  WeightRefit refit;
  TuningGrid inner = grid;
  inner.cv_refit_weights = false;
  switch (method) {
    case Method::Enet:
      out.weights = AdaptiveWeights::uniform(std_data.p());
      break;
    case Method::AEnet:
    case Method::AEnetCC:
      out.weights = adaptive_weights_from_enet(std_data, grid);
      if (grid.cv_refit_weights)
        refit = [inner](const StandardizedData& tr) { return adaptive_weights_from_enet(tr, inner).w; };
      break;
    case Method::WEnet:
    case Method::WEnetCC:
      out.weights = wenet_weights(std_data, grid, weight_options);
      if (grid.cv_refit_weights)
        refit = [inner, weight_options](const StandardizedData& tr) {
          return wenet_weights(tr, inner, weight_options).w;
        };
      break;
  }

  const PathTuning tuned = tune_path_method(std_data, path_base(method), grid, out.weights.w, refit);
  out.t1 = tuned.t1;
  out.lambda2 = tuned.lambda2;
  out.cv_table = tuned.cv_table;
  const Index n_u = std_data.n_uncensored();
  if (is_constrained(method)) {
    CCSelection cc = select_cc_model(std_data, method, tuned.t1, tuned.lambda2, grid, out.weights, settings);
    out.fit = cc.fit;
    out.cv_s = cc.cv_s;
    if (std::isfinite(cc.aicc)) out.aicc = cc.aicc;
    out.cc = std::move(cc);
  } else {
    out.fit = tuned.fit;
    out.fit.method = method;
    out.cv_s = tuned.cv_s;
    const Index kk = static_cast<Index>(out.fit.selected.size());
    if (kk < n_u - 1) out.aicc = aicc_score(out.cv_s, n_u, kk);
  }
  return out;
}

FitResult refit_fixed(const StandardizedData& std_data, Method method, double t1, double lambda2,
                      std::optional<double> lambda0, const AdaptiveWeights& weights, double varsigma,
                      const QPSettings& settings) {
  if (!is_constrained(method)) {
    const Vector w = method == Method::Enet ? Vector::Ones(std_data.p()) : weights.w;
    return fit_path_method_at_fraction(std_data, method, t1, lambda2, w);
  }
  if (!lambda0) throw InputError("constrained refit needs lambda0");
  const double budget = cc_budget(std_data, method, t1, lambda2, weights.w);
  return constrained_fit(method, std_data, weights, budget, lambda2, *lambda0, varsigma, settings);
}

}  // namespace survenet

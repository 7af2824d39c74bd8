#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "survenet/model_selection.hpp"

using namespace survenet;

namespace {

SurvivalDataset synthetic(std::uint64_t seed, Index n, Index p, double censor_prob) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::bernoulli_distribution cens(censor_prob);
  SurvivalDataset d;
  d.times.resize(n);
  d.status.resize(n);
  d.covariates.resize(n, p);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) d.covariates(i, j) = g(rng);
    d.times(i) = 1.0 + 2.0 * d.covariates(i, 0) - 1.5 * d.covariates(i, 1) + 0.5 * g(rng);
    d.status(i) = cens(rng) ? 0 : 1;
  }
  return d;
}

TuningGrid small_grid() {
  TuningGrid g;
  g.lambda2_grid = {0.0, 1.0};
  g.lambda0_grid = {1.0, 2.0};
  g.t1_grid = {0.0, 0.25, 0.5, 0.75, 1.0};
  g.folds = 3;
  return g;
}

}  // namespace

TEST_CASE("aicc score") {
  CHECK(aicc_score(2.0, 50, 5) == doctest::Approx(50.0 * std::log(2.0) + 500.0 / 44.0));
  CHECK(aicc_score(2.0, 50, 5) == doctest::Approx(46.021).epsilon(1e-4));
  CHECK(aicc_score(1.0, 50, 5) == doctest::Approx(500.0 / 44.0));
  CHECK(aicc_score(1.0, 50, 0) == 0.0);
  CHECK(aicc_score(3.0, 50, 5) > aicc_score(2.0, 50, 5));
  CHECK(aicc_score(2.0, 50, 6) > aicc_score(2.0, 50, 5));
  CHECK(aicc_score(0.0, 50, 5) == -std::numeric_limits<double>::infinity());
  CHECK_THROWS_WITH_AS(aicc_score(1.0, 50, 49), "score undefined", InputError);
  CHECK_THROWS_AS(aicc_score(-1.0, 50, 3), InputError);
}

TEST_CASE("stratified folds") {
  const StandardizedData s = prepare(synthetic(3, 47, 4, 0.3));
  const auto a = kfold_split(s, 5, 9);
  CHECK(a == kfold_split(s, 5, 9));
  CHECK(a != kfold_split(s, 5, 10));
  for (const IndexSet* stratum : {&s.uncensored_index, &s.censored_index}) {
    std::vector<int> count(5, 0);
    for (Index i : *stratum) ++count[static_cast<std::size_t>(a[static_cast<std::size_t>(i)])];
    const auto [lo, hi] = std::minmax_element(count.begin(), count.end());
    CHECK(*hi - *lo <= 1);
  }
  std::vector<int> total(5, 0);
  for (int f : a) ++total[static_cast<std::size_t>(f)];
  CHECK(*std::max_element(total.begin(), total.end()) - *std::min_element(total.begin(), total.end()) <= 1);

  // K = n_u: leave one event out
  const int nu = static_cast<int>(s.n_uncensored());
  const auto loo = kfold_split(s, nu, 1);
  std::vector<int> events(static_cast<std::size_t>(nu), 0);
  for (Index i : s.uncensored_index) ++events[static_cast<std::size_t>(loo[static_cast<std::size_t>(i)])];
  for (int e : events) CHECK(e == 1);

  CHECK_THROWS_WITH_AS(kfold_split(s, nu + 1, 1), doctest::Contains("impossible stratification"), InputError);
  CHECK_THROWS_AS(kfold_split(s, 1, 1), InputError);

  const IndexSet tr = training_rows(a, 2), te = fold_rows(a, 2);
  CHECK(tr.size() + te.size() == a.size());
}

TEST_CASE("cv score by hand") {
  SurvivalDataset d;
  d.times = (Vector(4) << 1.0, 2.0, 3.0, 4.0).finished();
  d.status = (Eigen::VectorXi(4) << 1, 1, 1, 1).finished();
  d.covariates = (Matrix(4, 1) << 1.0, -1.0, 2.0, 0.0).finished();
  const StandardizedData s = prepare(d);
  const std::vector<int> fold_of{0, 1, 0, 1};
  const Vector b0 = Vector::Constant(1, 0.5), b1 = Vector::Constant(1, -0.25);
  double expect = 0.0;
  for (Index i = 0; i < 4; ++i) {
    const double b = fold_of[static_cast<std::size_t>(i)] == 0 ? 0.5 : -0.25;
    const double r = s.y_std(i) - s.x_std(i, 0) * b;
    expect += r * r;
  }
  CHECK(cv_score(s, fold_of, {b0, b1}) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(cv_score(s, fold_of, {Vector::Zero(1), Vector::Zero(1)}) == doctest::Approx(s.y_std.squaredNorm()));
  CHECK_THROWS_AS(cv_score(s, fold_of, {b0}), InputError);

  SurvivalDataset c = d;
  c.status << 1, 0, 1, 1;
  c.times << 1.0, 2.0, 3.0, 4.0;
  const StandardizedData sc = prepare(c);
  CHECK_THROWS_WITH_AS(cv_score(sc, {0, 1, 0, 0}, {b0, b1}), "degenerate fold", InputError);
}

TEST_CASE("path tuning table matches direct refits") {
  const StandardizedData s = prepare(synthetic(5, 40, 5, 0.2));
  const TuningGrid g = small_grid();
  const Vector w = Vector::Ones(5);
  const PathTuning t = tune_path_method(s, Method::Enet, g, w);
  const auto fold_of = kfold_split(s, g.folds, g.seed);
  REQUIRE(t.cv_table.rows() == 2);
  REQUIRE(t.cv_table.cols() == 5);
  for (std::size_t l = 0; l < 2; ++l)
    for (std::size_t k = 0; k < 5; ++k) {
      std::vector<Vector> betas;
      for (int f = 0; f < g.folds; ++f)
        betas.push_back(
            fit_path_method_at_fraction(s.subset(training_rows(fold_of, f)), Method::Enet, g.t1_grid[k],
                                        g.lambda2_grid[l], w)
                .beta);
      CHECK(t.cv_table(static_cast<Index>(l), static_cast<Index>(k)) ==
            doctest::Approx(cv_score(s, fold_of, betas)).epsilon(1e-9));
    }
  CHECK(t.cv_s == doctest::Approx(t.cv_table.minCoeff()));
  const FitResult direct = fit_path_method_at_fraction(s, Method::Enet, t.t1, t.lambda2, w);
  CHECK((t.fit.beta - direct.beta).norm() <= 1e-12);
  // the true signal lives in the first two columns
  CHECK(t.cv_s < t.cv_table(0, 0));
}

TEST_CASE("ties go to the smaller t1 then the smaller lambda2") {
  const StandardizedData s = prepare(synthetic(6, 30, 3, 0.0));
  TuningGrid g = small_grid();
  g.t1_grid = {0.0};
  g.lambda2_grid = {3.0, 1.0, 2.0};
  const PathTuning t = tune_path_method(s, Method::Enet, g, Vector::Ones(3));
  CHECK(t.t1 == 0.0);
  CHECK(t.lambda2 == 1.0);
  CHECK(t.fit.beta.norm() == 0.0);

  g.t1_grid = {0.5};
  g.lambda2_grid = {2.0};
  const PathTuning one = tune_path_method(s, Method::Enet, g, Vector::Ones(3));
  CHECK(one.t1 == 0.5);
  CHECK(one.lambda2 == 2.0);
}

TEST_CASE("constrained selection without censoring ignores lambda0") {
  const StandardizedData s = prepare(synthetic(7, 30, 4, 0.0));
  REQUIRE(s.n_censored() == 0);
  TuningGrid g = small_grid();
  g.lambda0_grid = {2.0, 1.0, 3.0};
  const AdaptiveWeights w = AdaptiveWeights::uniform(4);
  const CCSelection sel = select_cc_model(s, Method::AEnetCC, 0.6, 0.5, g, w);
  REQUIRE(sel.scores.size() == 3);
  CHECK(sel.scores[0].lambda0 == 1.0);
  for (const CCScore& sc : sel.scores) CHECK(sc.aicc == doctest::Approx(sel.scores[0].aicc).epsilon(1e-8));
  CHECK(sel.lambda0 == 1.0);
  CHECK(sel.fit.lambda0 == 1.0);
  CHECK(sel.fit.beta.size() == 4);
  for (Index j : sel.fit.selected) CHECK(std::abs(sel.fit.beta(j)) > g.varsigma);
}

TEST_CASE("an infinite threshold selects the null model") {
  const StandardizedData s = prepare(synthetic(8, 30, 4, 0.3));
  TuningGrid g = small_grid();
  g.varsigma = std::numeric_limits<double>::infinity();
  const CCSelection sel = select_cc_model(s, Method::WEnetCC, 0.5, 1.0, g, AdaptiveWeights::uniform(4));
  CHECK(sel.fit.beta.norm() == 0.0);
  CHECK(sel.fit.selected.empty());
  const double null_cv = s.y_uncensored().squaredNorm();
  CHECK(sel.cv_s == doctest::Approx(null_cv));
  CHECK(sel.aicc == doctest::Approx(static_cast<double>(s.n_uncensored()) * std::log(null_cv)));
  CHECK(sel.fit.xi->minCoeff() >= 0.0);
}

TEST_CASE("grid json") {
  TuningGrid g = parse_tuning_grid(R"({"folds": 4, "t1_grid": [0.1, 0.9], "seed": 12})");
  CHECK(g.folds == 4);
  CHECK(g.t1_grid == std::vector<double>{0.1, 0.9});
  CHECK(g.seed == 12);
  CHECK(g.lambda2_grid.size() == 10);
  const TuningGrid back = parse_tuning_grid(tuning_grid_to_json(g));
  CHECK(back.t1_grid == g.t1_grid);
  CHECK(back.lambda0_grid == g.lambda0_grid);
  CHECK_THROWS_WITH_AS(parse_tuning_grid(R"({"fold": 4})"), doctest::Contains("unknown key"), InputError);
  CHECK_THROWS_AS(parse_tuning_grid(R"({"t1_grid": [1.5]})"), InputError);
  CHECK_THROWS_AS(parse_tuning_grid(R"({"folds": "five"})"), InputError);
  CHECK_THROWS_AS(parse_tuning_grid("[1, 2"), InputError);
  CHECK(TuningGrid::default_t1_grid().size() == 21);
  CHECK(TuningGrid::default_t1_grid()[10] == 0.5);
}

TEST_CASE("tuned fits for every method") {
  const StandardizedData s = prepare(synthetic(9, 60, 6, 0.25));
  const TuningGrid g = small_grid();
  WeightOptions wo;
  wo.bootstrap_b = 30;
  for (Method m : {Method::Enet, Method::AEnet, Method::WEnet, Method::AEnetCC, Method::WEnetCC}) {
    CAPTURE(to_string(m));
    const TunedFit t = fit_tuned(s, m, g, wo);
    CHECK(t.fit.method == m);
    CHECK(t.fit.beta.size() == 6);
    CHECK(std::isfinite(t.cv_s));
    CHECK(t.aicc.has_value());
    CHECK(t.cc.has_value() == is_constrained(m));
    if (is_constrained(m)) {
      CHECK(t.fit.xi->minCoeff() >= 0.0);
      const FitResult again = refit_fixed(s, m, t.t1, t.fit.lambda2, t.cc->lambda0, t.weights, g.varsigma);
      CHECK(again.beta.size() == 6);
    } else {
      const FitResult again = refit_fixed(s, m, t.t1, t.fit.lambda2, std::nullopt, t.weights, g.varsigma);
      CHECK((again.beta - t.fit.beta).norm() <= 1e-12);
    }
    // strong signal in the first two covariates
    CHECK(std::find(t.fit.selected.begin(), t.fit.selected.end(), 0) != t.fit.selected.end());
  }
  CHECK_THROWS_AS(refit_fixed(s, Method::AEnetCC, 0.5, 1.0, std::nullopt, AdaptiveWeights::uniform(6), 1e-3),
                  InputError);
}

TEST_CASE("weight mode names") {
  for (auto m : {WenetWeightMode::Auto, WenetWeightMode::GehanSe, WenetWeightMode::BootstrapSe})
    CHECK(wenet_weight_mode_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(wenet_weight_mode_from_string("nope"), InputError);
}

TEST_CASE("pure noise tunes toward the empty model") {
  int near_zero = 0;
  for (std::uint64_t rep = 0; rep < 50; ++rep) {
    SurvivalDataset d = synthetic(1000 + rep, 100, 40, 0.2);
    std::mt19937_64 rng(5000 + rep);
    std::normal_distribution<double> g;
    for (Index i = 0; i < d.n(); ++i) d.times(i) = g(rng);
    const StandardizedData s = prepare(d);
    const Vector ols = s.x_uncensored().colPivHouseholderQr().solve(s.y_uncensored());
    TuningGrid grid;
    grid.seed = rep;
    const PathTuning t = tune_path_method(s, Method::AEnet, grid, adaptive_weights(ols, 1.0).w);
    if (t.t1 <= 0.1) ++near_zero;
  }
  CHECK(near_zero >= 40);
}

TEST_CASE("a strong single signal is selected") {
  int hits = 0;
  for (std::uint64_t rep = 0; rep < 40; ++rep) {
    SurvivalDataset d = synthetic(2000 + rep, 60, 8, 0.25);
    std::mt19937_64 rng(7000 + rep);
    std::normal_distribution<double> g;
    for (Index i = 0; i < d.n(); ++i) d.times(i) = 3.0 * d.covariates(i, 4) + 0.5 * g(rng);
    const StandardizedData s = prepare(d);
    TuningGrid grid;
    grid.seed = rep;
    const TunedFit t = fit_tuned(s, Method::AEnet, grid);
    if (std::find(t.fit.selected.begin(), t.fit.selected.end(), 4) != t.fit.selected.end()) ++hits;
  }
  CHECK(hits >= 38);
}

#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "survenet/enet_solvers.hpp"
#include "survenet/gehan.hpp"

using namespace survenet;

namespace {

SurvivalDataset synthetic(std::uint64_t seed, Index n, Index p, double censor_prob, const Vector& beta) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::bernoulli_distribution cens(censor_prob);
  SurvivalDataset d;
  d.times.resize(n);
  d.status.resize(n);
  d.covariates.resize(n, p);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) d.covariates(i, j) = g(rng);
    d.times(i) = 1.0 + d.covariates.row(i).head(beta.size()).dot(beta) + 0.5 * g(rng);
    d.status(i) = cens(rng) ? 0 : 1;
  }
  return d;
}

Vector head_beta(std::initializer_list<double> v) {
  Vector b(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) b(i++) = x;
  return b;
}

double naive_objective(const Matrix& x, const Vector& y, const Vector& b, double l1, double l2, const Vector& pw,
                       const Vector& r) {
  return 0.5 * (y - x * b).squaredNorm() + l1 * pw.cwiseProduct(b).lpNorm<1>() +
         0.5 * l2 * r.cwiseProduct(b).squaredNorm();
}

}  // namespace

TEST_CASE("augmentation reproduces the ridge term") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  Matrix x(7, 3);
  for (Index i = 0; i < 7; ++i)
    for (Index j = 0; j < 3; ++j) x(i, j) = g(rng);
  Vector y = Vector::NullaryExpr(7, [&](Index) { return g(rng); });
  for (double l2 : {0.0, 0.6, 5.0}) {
    const Matrix xa = augmented_design(x, l2, Vector::Ones(3));
    const Vector ya = augmented_response(y, 3);
    for (int k = 0; k < 5; ++k) {
      Vector b = Vector::NullaryExpr(3, [&](Index) { return g(rng); });
      const double lhs = 0.5 * (ya - xa * b).squaredNorm();
      const double rhs = 0.5 * (y - x * b).squaredNorm() + 0.5 * l2 * b.squaredNorm();
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));
    }
  }
}

TEST_CASE("enet reductions and oracles") {
  const auto s = prepare(synthetic(2, 60, 6, 0.3, head_beta({1.5, -1.0})));
  const Matrix xu = s.x_uncensored();
  const Vector yu = s.y_uncensored();
  const Vector ones = Vector::Ones(6);

  SUBCASE("lambda2 = 0 is the lasso") {
    LassoPath lasso = lasso_path(xu, yu);
    const double l1 = 0.2 * lasso.lambda_max();
    FitResult fit = enet_fit(s, l1, 0.0);
    CHECK((fit.beta - solve_at_lambda(lasso, l1)).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
  SUBCASE("lambda1 = 0 is the rescaled ridge solution") {
    const double l2 = 0.7;
    Matrix a = xu.transpose() * xu;
    a.diagonal().array() += l2;
    const Vector ridge = a.ldlt().solve(xu.transpose() * yu);
    FitResult fit = enet_fit(s, 0.0, l2);
    CHECK((fit.beta - (1.0 + l2) * ridge).lpNorm<Eigen::Infinity>() <= 1e-9);
  }
  SUBCASE("matches coordinate descent on the naive objective") {
    const double l2 = 1.1;
    for (double l1 : {0.01, 0.05, 0.1}) {
      FitResult fit = enet_fit(s, l1, l2);
      Vector ref = oracle::enet_cd(xu, yu, l1, l2, ones, ones);
      CHECK((fit.beta_naive - ref).lpNorm<Eigen::Infinity>() <= 1e-8);
      CHECK((fit.beta - (1.0 + l2) * ref).lpNorm<Eigen::Infinity>() <= 1e-7);
    }
  }
}

TEST_CASE("enet on a wide 10 x 30 instance reaches the naive optimum") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  SurvivalDataset d = synthetic(3, 10, 30, 0.0, head_beta({2.0, 1.0}));
  const auto s = prepare(d);
  const Matrix xu = s.x_uncensored();
  const Vector yu = s.y_uncensored();
  const double l1 = 0.02, l2 = 0.6;
  FitResult fit = enet_fit(s, l1, l2);
  const Vector ones = Vector::Ones(30);
  Vector ref = oracle::enet_cd(xu, yu, l1, l2, ones, ones);
  CHECK(naive_objective(xu, yu, fit.beta_naive, l1, l2, ones, ones) <=
        naive_objective(xu, yu, ref, l1, l2, ones, ones) + 1e-8);
}

TEST_CASE("aenet") {
  const auto s = prepare(synthetic(4, 50, 8, 0.25, head_beta({1.0, 0.0, -2.0})));
  const Matrix xu = s.x_uncensored();
  const Vector yu = s.y_uncensored();
  const double l2 = 0.6;

  SUBCASE("unit weights reproduce enet") {
    FitResult a = aenet_fit(s, 0.05, l2, AdaptiveWeights::uniform(8));
    FitResult e = enet_fit(s, 0.05, l2);
    CHECK((a.beta - e.beta).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
  SUBCASE("weighted l1 optimum and random probes") {
    Vector w(8);
    w << 0.5, 3.0, 0.4, 2.0, 1.0, 5.0, 1.5, 0.8;
    AdaptiveWeights aw{w, WeightSource::InverseInitialCoefficient, 1.0};
    const double l1 = 0.03;
    FitResult fit = aenet_fit(s, l1, l2, aw);
    Vector ref = oracle::enet_cd(xu, yu, l1, l2, w, Vector::Ones(8));
    CHECK((fit.beta_naive - ref).lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK((fit.beta - (1.0 + l2) * fit.beta_naive).norm() <= 1e-14);

    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0.0, 0.05);
    const Vector b = fit.beta / (1.0 + l2);
    const double best = naive_objective(xu, yu, b, l1, l2, w, Vector::Ones(8));
    int worse = 0;
    for (int k = 0; k < 1000; ++k) {
      Vector probe = b + Vector::NullaryExpr(8, [&](Index) { return g(rng); });
      if (naive_objective(xu, yu, probe, l1, l2, w, Vector::Ones(8)) >= best - 1e-12) ++worse;
    }
    CHECK(worse == 1000);
  }
  SUBCASE("a capped weight excludes its variable") {
    Vector w = Vector::Ones(8);
    w(2) = kAdaptiveWeightCap;
    FitResult fit = aenet_fit(s, 1e-3, l2, AdaptiveWeights{w, WeightSource::InverseInitialCoefficient, 1.0});
    CHECK(fit.beta(2) == 0.0);
  }
}

TEST_CASE("adaptive weights") {
  AdaptiveWeights w = adaptive_weights(head_beta({2.0, 1.0, 0.5}), 1.0);
  CHECK(w.w(0) == doctest::Approx(0.5));
  CHECK(w.w(1) == doctest::Approx(1.0));
  CHECK(w.w(2) == doctest::Approx(2.0));
  CHECK(adaptive_weights(head_beta({1.0, 0.0}), 1.0).w(1) == kAdaptiveWeightCap);
  CHECK(adaptive_weights(head_beta({3.0, 0.0}), 0.0).w == Vector::Ones(2));
  CHECK_THROWS_WITH_AS(adaptive_weights(Vector::Zero(3), 1.0), "uninformative initial estimator", InputError);
}

TEST_CASE("wenet") {
  const auto s = prepare(synthetic(5, 40, 6, 0.3, head_beta({1.0, -1.0})));
  const Matrix xu = s.x_uncensored();
  const Vector yu = s.y_uncensored();

  SUBCASE("unit weights coincide with enet") {
    for (double l2 : {0.0, 0.6, 2.2}) {
      FitResult w = wenet_fit(s, 0.04, l2, AdaptiveWeights::uniform(6));
      FitResult e = enet_fit(s, 0.04, l2);
      CHECK((w.beta - e.beta).lpNorm<Eigen::Infinity>() <= 1e-10);
      CHECK(w.output_scale == doctest::Approx(std::sqrt(1.0 + l2)));
      CHECK((w.beta_starred - std::sqrt(1.0 + l2) * w.beta_naive).norm() <= 1e-14);
    }
  }
  SUBCASE("lambda2 = 0 and unit weights is the lasso") {
    LassoPath lasso = lasso_path(xu, yu);
    FitResult w = wenet_fit(s, 0.05, 0.0, AdaptiveWeights::uniform(6));
    CHECK((w.beta - solve_at_lambda(lasso, 0.05)).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
  SUBCASE("weighted ridge objective") {
    Vector w(6);
    w << 0.2, 0.5, 1.0, 2.0, 0.7, 1.3;
    const double l1 = 0.02, l2 = 1.7;
    FitResult fit = wenet_fit(s, l1, l2, AdaptiveWeights{w, WeightSource::BootstrapSe, 0.0});
    Vector ref = oracle::enet_cd(xu, yu, l1, l2, w, w);
    CHECK((fit.beta_naive - ref).lpNorm<Eigen::Infinity>() <= 1e-8);
    std::mt19937_64 rng(10);
    std::normal_distribution<double> g(0.0, 0.05);
    const double best = naive_objective(xu, yu, fit.beta_naive, l1, l2, w, w);
    int worse = 0;
    for (int k = 0; k < 1000; ++k) {
      Vector probe = fit.beta_naive + Vector::NullaryExpr(6, [&](Index) { return g(rng); });
      if (naive_objective(xu, yu, probe, l1, l2, w, w) >= best - 1e-12) ++worse;
    }
    CHECK(worse == 1000);
  }
}

TEST_CASE("fit at fraction matches the path") {
  const auto s = prepare(synthetic(6, 40, 5, 0.2, head_beta({1.0})));
  FitResult f0 = fit_path_method_at_fraction(s, Method::AEnet, 0.0, 0.6, Vector::Ones(5));
  CHECK(f0.beta.norm() == 0.0);
  FitResult f1 = fit_path_method_at_fraction(s, Method::Enet, 1.0, 0.6, Vector::Ones(5));
  PenalizedPath path(Method::Enet, s.x_uncensored(), s.y_uncensored(), 0.6, Vector::Ones(5));
  CHECK((f1.beta_naive - path.naive_at_fraction(1.0)).norm() == 0.0);
}

TEST_CASE("bootstrap standard-error weights") {
  const auto s = prepare(synthetic(7, 40, 5, 0.2, head_beta({1.0, 0.5})));
  AdaptiveWeights a = wenet_weights_bootstrap(s, 0.5, 0.6, 50, 123);
  AdaptiveWeights b = wenet_weights_bootstrap(s, 0.5, 0.6, 50, 123);
  CHECK(a.w == b.w);
  CHECK(a.w.minCoeff() >= kStandardErrorFloor);
  CHECK_THROWS_AS(wenet_weights_bootstrap(s, 0.5, 0.6, 1, 123), InputError);

  SurvivalDataset flat = synthetic(8, 30, 3, 0.0, head_beta({0.0}));
  flat.times.setConstant(2.0);
  AdaptiveWeights f = wenet_weights_bootstrap(prepare(flat), 0.5, 0.6, 20, 1);
  CHECK(f.w == Vector::Constant(3, kStandardErrorFloor));
}

TEST_CASE("gehan loss and estimating function") {
  SurvivalDataset d;
  d.times = head_beta({0.0, 1.0});
  d.status = Eigen::VectorXi::Ones(2);
  d.covariates = Matrix::Zero(2, 1);
  CHECK(gehan_loss(d, Vector::Zero(1)) == doctest::Approx(1.0));

  SurvivalDataset flat = d;
  flat.times = head_beta({0.5, 2.5});
  flat.covariates.col(0) = head_beta({0.0, 1.0});
  CHECK(gehan_loss(flat, head_beta({2.0})) == 0.0);

  const SurvivalDataset data = synthetic(9, 25, 2, 0.3, head_beta({1.0, -0.5}));
  const Vector b = head_beta({0.3, 0.1});
  const double eps = 1e-3;
  Vector grad;
  gehan_smoothed_loss(data, b, eps, &grad);
  for (Index j = 0; j < 2; ++j) {
    Vector bp = b, bm = b;
    bp(j) += 1e-6;
    bm(j) -= 1e-6;
    const double fd = (gehan_smoothed_loss(data, bp, eps) - gehan_smoothed_loss(data, bm, eps)) / 2e-6;
    CHECK(grad(j) == doctest::Approx(fd).epsilon(1e-4));
  }
  Vector tight;
  gehan_smoothed_loss(data, b, 1e-9, &tight);
  const Vector u = static_cast<double>(data.n()) * gehan_estimating_function(data, b);
  CHECK((tight - u).lpNorm<Eigen::Infinity>() <= 1e-4);
}

TEST_CASE("gehan fit") {
  SUBCASE("one covariate: matches the best breakpoint of the piecewise-linear loss") {
    const SurvivalDataset d = synthetic(10, 30, 1, 0.3, head_beta({2.0}));
    GehanFit fit = gehan_fit(d);
    double best = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < d.n(); ++i)
      for (Index k = 0; k < d.n(); ++k) {
        const double dx = d.covariates(i, 0) - d.covariates(k, 0);
        if (dx == 0.0) continue;
        best = std::min(best, gehan_loss(d, head_beta({(d.times(i) - d.times(k)) / dx})));
      }
    CHECK(fit.loss <= best + 1e-6 * (1.0 + best));
  }
  SUBCASE("equivariance") {
    const SurvivalDataset d = synthetic(11, 40, 2, 0.2, head_beta({1.0, -1.0}));
    const Vector b = gehan_fit(d).beta;
    SurvivalDataset twice = d;
    twice.times *= 2.0;
    CHECK((gehan_fit(twice).beta - 2.0 * b).lpNorm<Eigen::Infinity>() <= 1e-4);
    IndexSet perm;
    for (Index i = d.n() - 1; i >= 0; --i) perm.push_back(i);
    CHECK((gehan_fit(d.subset(perm)).beta - b).lpNorm<Eigen::Infinity>() <= 1e-4);
  }
  SUBCASE("slope recovery over replicates") {
    std::vector<double> est;
    for (int r = 0; r < 50; ++r) est.push_back(gehan_fit(synthetic(100 + r, 60, 1, 0.0, head_beta({1.5}))).beta(0));
    double mean = 0.0;
    for (double e : est) mean += e;
    mean /= 50.0;
    double var = 0.0;
    for (double e : est) var += (e - mean) * (e - mean);
    const double se = std::sqrt(var / 49.0 / 50.0);
    CHECK(std::abs(mean - 1.5) <= 3.0 * se);
  }
  SUBCASE("needs more events than covariates") {
    const SurvivalDataset d = synthetic(12, 5, 6, 0.0, head_beta({1.0}));
    CHECK_THROWS_AS(gehan_fit(d), InputError);
    CHECK_THROWS_AS(wenet_weights_gehan(d, 10, 1), InputError);
  }
}

TEST_CASE("gehan bootstrap weights are deterministic") {
  const SurvivalDataset d = synthetic(13, 40, 3, 0.2, head_beta({1.0, 0.0, -1.0}));
  AdaptiveWeights a = wenet_weights_gehan(d, 20, 77);
  AdaptiveWeights b = wenet_weights_gehan(d, 20, 77);
  CHECK(a.w == b.w);
  CHECK(a.w.minCoeff() > 0.0);
  CHECK(a.source == WeightSource::GehanSe);
}

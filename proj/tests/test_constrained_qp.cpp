#include <doctest.h>

#include <limits>
#include <random>

#include "oracles.hpp"
#include "qp_oracle.hpp"
#include "survenet/constrained_qp.hpp"

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
    d.times(i) = 1.0 + d.covariates(i, 0) - 0.5 * d.covariates(i, p - 1) + 0.5 * g(rng);
    d.status(i) = cens(rng) ? 0 : 1;
  }
  return d;
}

}  // namespace

TEST_CASE("unconstrained strictly convex quadratic is a linear solve") {
  std::mt19937_64 rng(1);
  QPProblem qp;
  qp.q_matrix = oracle::random_spd(5, rng);
  std::normal_distribution<double> g;
  qp.linear_term = Vector::NullaryExpr(5, [&](Index) { return g(rng); });
  qp.lower_bounds = Vector::Constant(5, -std::numeric_limits<double>::infinity());
  qp.ineq_matrix = Matrix(0, 5);
  qp.ineq_rhs = Vector(0);
  QPSolution sol = solve_qp(qp);
  const Vector exact = qp.q_matrix.ldlt().solve(-qp.linear_term);
  CHECK((sol.z - exact).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("random budget problems match projected gradient") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> dim(2, 8);
  double worst = 0.0;
  for (int rep = 0; rep < 25; ++rep) {
    const int n = dim(rng);
    QPProblem qp;
    qp.q_matrix = oracle::random_spd(n, rng);
    qp.linear_term = Vector::NullaryExpr(n, [&](Index) { return 3.0 * g(rng); });
    qp.lower_bounds = Vector::Zero(n);
    qp.ineq_matrix = Vector::NullaryExpr(n, [&](Index) { return 0.5 + std::abs(g(rng)); }).transpose();
    qp.ineq_rhs = Vector::Constant(1, 0.5 + std::abs(g(rng)));
    QPSolution sol = solve_qp(qp);
    CHECK(sol.kkt_residual <= 1e-8);
    const Vector ref = oracle::fista_budget_qp(qp.q_matrix, qp.linear_term, qp.ineq_matrix.row(0).transpose(),
                                               qp.ineq_rhs(0), 200000);
    worst = std::max(worst, (sol.z - ref).lpNorm<Eigen::Infinity>());
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("builder shapes") {
  const auto s = prepare(synthetic(3, 5, 3, 0.0));
  // make exactly two censored rows below the largest time
  SurvivalDataset d = synthetic(3, 6, 3, 0.0);
  d.status(0) = 0;
  d.status(1) = 0;
  const auto sd = prepare(d);
  REQUIRE(sd.n_censored() == 2);
  QPProblem qp = build_aenetcc_qp(sd, AdaptiveWeights::uniform(3), 1.0, 0.6, 1.0);
  CHECK(qp.dim() == 8);
  CHECK(qp.ineq_matrix.rows() == 3);
  CHECK((qp.q_matrix - qp.q_matrix.transpose()).norm() == 0.0);
  CHECK(qp.lower_bounds == Vector::Zero(8));
  CHECK(s.n_censored() == 0);
}

TEST_CASE("zero budget leaves only the slack problem") {
  SurvivalDataset d = synthetic(4, 30, 4, 0.4);
  const auto s = prepare(d);
  REQUIRE(s.n_censored() > 0);
  FitResult fit = aenetcc_fit(s, AdaptiveWeights::uniform(4), 0.0, 0.6, 1.4);
  CHECK(fit.beta.lpNorm<Eigen::Infinity>() <= 1e-9);
  const Vector expected = s.y_censored.cwiseMax(0.0);
  CHECK((*fit.xi - expected).lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("no censored rows reproduces aenet at the same budget") {
  SurvivalDataset d = synthetic(5, 40, 5, 0.0);
  const auto s = prepare(d);
  REQUIRE(s.n_censored() == 0);
  Vector w(5);
  w << 0.5, 2.0, 1.0, 4.0, 0.8;
  const AdaptiveWeights aw{w, WeightSource::InverseInitialCoefficient, 1.0};
  for (double l2 : {0.0, 0.6, 2.2}) {
    PenalizedPath path(Method::AEnet, s.x_uncensored(), s.y_uncensored(), l2, w);
    for (double t : {0.2, 0.6, 0.95}) {
      FitResult ref = path.make_fit(path.naive_at_fraction(t), &s);
      FitResult cc = aenetcc_fit(s, aw, t * path.terminus_l1(), l2, 1.0);
      CHECK((cc.beta - ref.beta).lpNorm<Eigen::Infinity>() <= 1e-6);
    }
  }
}

TEST_CASE("large budget without censoring gives the ridge solution") {
  SurvivalDataset d = synthetic(6, 30, 4, 0.0);
  const auto s = prepare(d);
  const Matrix xu = s.x_uncensored();
  Matrix a = xu.transpose() * xu;
  a.diagonal().array() += 1.1;
  const Vector ridge = a.ldlt().solve(xu.transpose() * s.y_uncensored());
  FitResult fit = aenetcc_fit(s, AdaptiveWeights::uniform(4), 1e6, 1.1, 1.0);
  CHECK((fit.beta_naive - ridge).lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("wenetcc with unit weights coincides with aenetcc") {
  SurvivalDataset d = synthetic(7, 40, 4, 0.35);
  const auto s = prepare(d);
  const double l2 = 1.7, t = 0.4, l0 = 1.8;
  // the wenet budget lives in coordinates scaled by sqrt(1 + lambda2)
  FitResult a = aenetcc_fit(s, AdaptiveWeights::uniform(4), t, l2, l0);
  FitResult w = wenetcc_fit(s, AdaptiveWeights::uniform(4), t * std::sqrt(1.0 + l2), l2, l0);
  CHECK((a.beta_naive - w.beta_naive).lpNorm<Eigen::Infinity>() <= 1e-7);
  CHECK((a.beta - w.beta).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("censoring-constrained problems match the projected-gradient oracle") {
  double worst = 0.0;
  for (int rep = 0; rep < 25; ++rep) {
    SurvivalDataset d = synthetic(200 + static_cast<std::uint64_t>(rep), 14, 1 + rep % 4, 0.4);
    const auto s = prepare(d);
    const Index p = s.p();
    Vector w = Vector::LinSpaced(p, 0.5, 2.0);
    const AdaptiveWeights aw{w, WeightSource::BootstrapSe, 0.0};
    QPProblem qp = rep % 2 == 0 ? build_aenetcc_qp(s, aw, 0.3, 0.6, 1.4) : build_wenetcc_qp(s, aw, 0.3, 1.1, 2.2);
    QPSolution sol = solve_qp(qp);
    CHECK(sol.kkt_residual <= 1e-8);
    const Vector ref = oracle::censored_qp(qp, 200000);
    const Vector b = sol.z.head(p) - sol.z.segment(p, p);
    const Vector rb = ref.head(p) - ref.segment(p, p);
    worst = std::max(worst, (b - rb).lpNorm<Eigen::Infinity>());
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("fit invariants") {
  SurvivalDataset d = synthetic(8, 50, 6, 0.4);
  const auto s = prepare(d);
  Vector w = Vector::LinSpaced(6, 0.3, 3.0);
  const AdaptiveWeights aw{w, WeightSource::InverseInitialCoefficient, 1.0};
  double last_xi = std::numeric_limits<double>::infinity();
  for (double l0 : {0.5, 1.0, 1.4, 1.8, 2.2, 2.6, 3.0, 10.0}) {
    FitResult fit = aenetcc_fit(s, aw, 0.5, 0.6, l0);
    CHECK(*fit.constraint_violation <= 1e-8);
    const Vector slack = s.x_censored * fit.beta_naive + *fit.xi - s.y_censored;
    CHECK(slack.minCoeff() >= -1e-8);
    CHECK(fit.xi->minCoeff() >= 0.0);
    CHECK(fit.lambda0.value() == l0);
    const double xi2 = fit.xi->squaredNorm();
    CHECK(xi2 <= last_xi + 1e-8);
    last_xi = xi2;
    for (Index j : fit.selected) CHECK(std::abs(fit.beta(j)) > kDefaultVarsigma);
  }
}

TEST_CASE("objective dominates random feasible probes") {
  SurvivalDataset d = synthetic(9, 30, 3, 0.4);
  const auto s = prepare(d);
  QPProblem qp = build_aenetcc_qp(s, AdaptiveWeights::uniform(3), 0.4, 0.6, 1.4);
  QPSolution sol = solve_qp(qp);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Index p = 3, m = qp.num_slack;
  int ok = 0;
  for (int k = 0; k < 1000; ++k) {
    Vector z(2 * p + m);
    for (Index j = 0; j < 2 * p; ++j) z(j) = u(rng);
    z.head(2 * p) *= 0.4 * u(rng) / z.head(2 * p).sum();
    const Vector b = z.head(p) - z.segment(p, p);
    if (m > 0) z.tail(m) = (-qp.ineq_rhs.tail(m) - qp.ineq_matrix.block(1, p, m, p) * b).cwiseMax(0.0);
    if (qp.primal_violation(z) <= 1e-12 && qp.objective(z) >= sol.objective - 1e-10) ++ok;
  }
  CHECK(ok == 1000);
}

TEST_CASE("a very large slack penalty makes the constraints hard") {
  SurvivalDataset d = synthetic(10, 30, 3, 0.4);
  const auto s = prepare(d);
  FitResult fit = aenetcc_fit(s, AdaptiveWeights::uniform(3), 0.8, 0.6, 1e8);
  CHECK(fit.xi->lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("input checks") {
  SurvivalDataset d = synthetic(11, 20, 3, 0.3);
  const auto s = prepare(d);
  CHECK_THROWS_AS(build_aenetcc_qp(s, AdaptiveWeights::uniform(3), -1.0, 0.6, 1.0), InputError);
  CHECK_THROWS_AS(build_aenetcc_qp(s, AdaptiveWeights::uniform(2), 1.0, 0.6, 1.0), InputError);
  CHECK_THROWS_AS(build_wenetcc_qp(s, AdaptiveWeights::uniform(3), 1.0, -0.6, 1.0), InputError);
}

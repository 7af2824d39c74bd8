#include "survenet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "survenet/parallel.hpp"

namespace survenet {

namespace {

constexpr int kMaxRedraws = 10;

double median(std::vector<double> v) {
  const std::size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), v.end());
  const double upper = v[m];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m));
  return 0.5 * (lower + upper);
}

void check_groups(Index n, const Eigen::VectorXi& status, const std::vector<int>& groups) {
  if (status.size() != n || static_cast<Index>(groups.size()) != n) throw InputError("length mismatch");
  for (int g : groups)
    if (g != 0 && g != 1) throw InputError("group labels must be 0 or 1");
}

}  // namespace

double mse_train(const SurvivalDataset& data, const Vector& beta, double intercept) {
  if (beta.size() != data.p()) throw InputError("coefficient length mismatch");
  double total = 0.0;
  Index events = 0;
  for (Index i = 0; i < data.n(); ++i) {
    if (data.status(i) != 1) continue;
    const double r = intercept + data.covariates.row(i).dot(beta) - data.times(i);
    total += r * r;
    ++events;
  }
  if (events == 0) throw InputError("mse_train needs at least one event");
  return total / static_cast<double>(events);
}

double mse_test(const Matrix& x, const Vector& y, const Vector& beta, double intercept) {
  if (x.rows() == 0) throw InputError("empty test set");
  if (x.rows() != y.size() || x.cols() != beta.size()) throw InputError("dimension mismatch");
  return ((x * beta).array() + intercept - y.array()).square().mean();
}

BootstrapSummary bootstrap_632_variance(const SurvivalDataset& data, const BootstrapFitter& fitter, int b,
                                        std::uint64_t seed) {
  data.validate();
  if (b < 2) throw InputError("bootstrap needs B >= 2");
  const Index n = data.n();
  const Index m = std::max<Index>(1, static_cast<Index>(std::lround(0.632 * static_cast<double>(n))));
  BootstrapSummary out;
  out.b = b;
  out.seed = seed;
  out.subsample_size = m;
  out.beta_replicates = Matrix::Zero(b, data.p());
  std::vector<int> redraws(static_cast<std::size_t>(b), 0);

  parallel_for(static_cast<std::size_t>(b), [&](std::size_t r) {
    std::mt19937_64 rng(derive_seed(seed, r));
    IndexSet perm(static_cast<std::size_t>(n));
    for (int attempt = 0;; ++attempt) {
      std::iota(perm.begin(), perm.end(), Index{0});
      // partial Fisher-Yates
      for (Index i = 0; i < m; ++i) {
        std::uniform_int_distribution<Index> pick(i, n - 1);
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
      }
      IndexSet rows(perm.begin(), perm.begin() + m);
      std::sort(rows.begin(), rows.end());
      const SurvivalDataset sub = data.subset(rows);
      if (sub.events() == 0) {
        if (attempt + 1 >= kMaxRedraws) throw InputError("bootstrap replicate without events after 10 redraws");
        ++redraws[r];
        continue;
      }
      const Vector beta = fitter(prepare(sub));
      if (beta.size() != data.p()) throw InputError("bootstrap fitter returned the wrong length");
      out.beta_replicates.row(static_cast<Index>(r)) = beta.transpose();
      break;
    }
  });

  out.resamples = std::accumulate(redraws.begin(), redraws.end(), 0);
  const Vector mean = out.beta_replicates.colwise().mean().transpose();
  out.variance = (out.beta_replicates.rowwise() - mean.transpose()).colwise().squaredNorm().transpose() /
                 static_cast<double>(b - 1);
  return out;
}

RiskSplit risk_split(const Matrix& train_x, const Matrix& test_x, const Vector& beta) {
  if (train_x.rows() == 0 || test_x.rows() == 0) throw InputError("empty input");
  if (train_x.cols() != beta.size() || test_x.cols() != beta.size()) throw InputError("dimension mismatch");
  const Vector train_scores = train_x * beta;
  RiskSplit out;
  out.test_scores = test_x * beta;
  out.threshold = median(std::vector<double>(train_scores.data(), train_scores.data() + train_scores.size()));
  out.high_risk.resize(static_cast<std::size_t>(test_x.rows()));
  int high = 0;
  for (Index i = 0; i < test_x.rows(); ++i) {
    out.high_risk[static_cast<std::size_t>(i)] = out.test_scores(i) < out.threshold ? 1 : 0;
    high += out.high_risk[static_cast<std::size_t>(i)];
  }
  const bool flat = train_scores.maxCoeff() == train_scores.minCoeff();
  out.degenerate = flat || high == 0 || high == static_cast<int>(test_x.rows());
  return out;
}

LogRankResult logrank_test(const Vector& times, const Eigen::VectorXi& status, const std::vector<int>& groups) {
  const Index n = times.size();
  check_groups(n, status, groups);
  const auto ones = std::count(groups.begin(), groups.end(), 1);
  if (ones == 0 || ones == static_cast<long>(n)) throw InputError("log-rank test needs two nonempty groups");

  IndexSet order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return times(a) < times(b); });

  LogRankResult out;
  double at_risk[2] = {0.0, 0.0};
  for (int g : groups) at_risk[g] += 1.0;
  std::size_t k = 0;
  while (k < order.size()) {
    const double t = times(order[k]);
    double d[2] = {0.0, 0.0}, leaving[2] = {0.0, 0.0};
    for (; k < order.size() && times(order[k]) == t; ++k) {
      const Index i = order[k];
      const int g = groups[static_cast<std::size_t>(i)];
      leaving[g] += 1.0;
      if (status(i) == 1) d[g] += 1.0;
    }
    const double nt = at_risk[0] + at_risk[1], dt = d[0] + d[1];
    if (dt > 0.0) {
      for (int g = 0; g < 2; ++g) {
        out.observed[g] += d[g];
        out.expected[g] += dt * at_risk[g] / nt;
      }
      if (nt > 1.0) out.variance += dt * (at_risk[0] / nt) * (at_risk[1] / nt) * (nt - dt) / (nt - 1.0);
    }
    at_risk[0] -= leaving[0];
    at_risk[1] -= leaving[1];
  }
  if (out.variance > 0.0) {
    const double diff = out.observed[0] - out.expected[0];
    out.statistic = diff * diff / out.variance;
    out.p_value = std::erfc(std::sqrt(out.statistic / 2.0));
  }
  return out;
}

std::vector<KMPoint> km_curve(const Vector& times, const Eigen::VectorXi& status) {
  if (times.size() != status.size()) throw InputError("length mismatch");
  IndexSet order(static_cast<std::size_t>(times.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return times(a) < times(b); });
  std::vector<KMPoint> curve{{0.0, 1.0}};
  double surv = 1.0, at_risk = static_cast<double>(times.size());
  std::size_t k = 0;
  while (k < order.size()) {
    const double t = times(order[k]);
    double d = 0.0, leaving = 0.0;
    for (; k < order.size() && times(order[k]) == t; ++k) {
      leaving += 1.0;
      if (status(order[k]) == 1) d += 1.0;
    }
    if (d > 0.0) {
      surv *= 1.0 - d / at_risk;
      curve.push_back({t, surv});
    }
    at_risk -= leaving;
  }
  return curve;
}

void write_km_curves_csv(std::ostream& out, const Vector& times, const Eigen::VectorXi& status,
                         const std::vector<int>& groups) {
  check_groups(times.size(), status, groups);
  const auto precision = out.precision(12);
  out << "time,survival,group\n";
  for (int g = 0; g < 2; ++g) {
    IndexSet rows;
    for (std::size_t i = 0; i < groups.size(); ++i)
      if (groups[i] == g) rows.push_back(static_cast<Index>(i));
    if (rows.empty()) continue;
    Eigen::VectorXi st(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) st(static_cast<Index>(i)) = status(rows[i]);
    for (const KMPoint& pt : km_curve(select_rows(times, rows), st))
      out << pt.time << ',' << pt.survival << ',' << g << '\n';
  }
  out.precision(precision);
}

}  // namespace survenet

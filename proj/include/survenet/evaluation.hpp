#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "survenet/common.hpp"
#include "survenet/survival_core.hpp"

namespace survenet {

/// Mean squared error over the uncensored rows of the training data,
/// predictions alpha + x'beta on the log-time scale. Censored responses never
/// enter.
double mse_train(const SurvivalDataset& data, const Vector& beta, double intercept);

/// Mean squared error over all rows of complete test data.
double mse_test(const Matrix& x, const Vector& y, const Vector& beta, double intercept);

struct BootstrapSummary {
  int b = 0;
  Matrix beta_replicates;   // B x p
  Vector variance;          // coordinatewise sample variance (B - 1 denominator)
  std::uint64_t seed = 0;
  int resamples = 0;        // replicates redrawn because they held no event
  Index subsample_size = 0;
};

/// Coefficients from data prepared for one replicate.
using BootstrapFitter = std::function<Vector(const StandardizedData&)>;

constexpr int kDefaultBootstrapB = 500;

/// 0.632 bootstrap: each replicate draws round(0.632 n) rows without
/// replacement, re-weights, re-standardizes and refits. A draw with no event
/// is redrawn, at most 10 times per replicate.
BootstrapSummary bootstrap_632_variance(const SurvivalDataset& data, const BootstrapFitter& fitter, int b,
                                        std::uint64_t seed);

struct RiskSplit {
  std::vector<int> high_risk;  // 1 = high risk, per test row
  Vector test_scores;
  double threshold = 0.0;
  bool degenerate = false;     // all scores equal, or everyone in one group
};

/// Scores x'beta. The threshold is the median training score, i.e. the median
/// predicted training log-time once the shared intercept is dropped. A test
/// subject whose score falls below it has the shorter predicted survival and
/// is labelled high risk.
RiskSplit risk_split(const Matrix& train_x, const Matrix& test_x, const Vector& beta);

struct LogRankResult {
  double statistic = 0.0;  // chi-square, 1 df
  double p_value = 1.0;
  double observed[2] = {0.0, 0.0};
  double expected[2] = {0.0, 0.0};
  double variance = 0.0;
};

/// Two-sample log-rank test; `groups` holds 0 or 1 per subject.
LogRankResult logrank_test(const Vector& times, const Eigen::VectorXi& status, const std::vector<int>& groups);

struct KMPoint {
  double time;
  double survival;
};

/// Product-limit curve on the raw time scale: one point at time 0 with
/// survival 1, then one per distinct event time.
std::vector<KMPoint> km_curve(const Vector& times, const Eigen::VectorXi& status);

/// CSV with columns time,survival,group, one curve per group label.
void write_km_curves_csv(std::ostream& out, const Vector& times, const Eigen::VectorXi& status,
                         const std::vector<int>& groups);

}  // namespace survenet

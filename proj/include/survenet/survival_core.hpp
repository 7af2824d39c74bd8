#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "survenet/common.hpp"

namespace survenet {

/// Right-censored observations on the log-time scale.
///
/// `status(i) == 1` marks an observed event, 0 a censored time. Covariate
/// names are optional and only used for reporting.
struct SurvivalDataset {
  Vector times;             // log survival or censoring times
  Eigen::VectorXi status;   // 1 = event, 0 = censored
  Matrix covariates;        // n x p
  std::vector<std::string> names;

  Index n() const { return times.size(); }
  Index p() const { return covariates.cols(); }
  Index events() const { return status.count(); }

  /// Throws InputError("empty input") / InputError("invalid status") /
  /// InputError on dimension mismatch or non-finite values.
  void validate() const;

  SurvivalDataset subset(const IndexSet& rows) const;
};

/// Permutation sorting by time; ties put events before censored times, then
/// keep original index order.
IndexSet time_order(const SurvivalDataset& data);

SurvivalDataset sorted_by_time(const SurvivalDataset& data);

bool is_time_sorted(const SurvivalDataset& data);

/// Kaplan-Meier jump sizes, one per observation, aligned to the time-sorted
/// order of `data`.
struct KMWeightVector {
  Vector weights;

  double sum() const { return weights.sum(); }
  Index size() const { return weights.size(); }
};

KMWeightVector compute_km_weights(const SurvivalDataset& data);

/// Marks the largest observation (after tie-breaking) as an event if it was
/// censored. Everything else, including row order, is untouched.
SurvivalDataset efron_tail_correction(const SurvivalDataset& data);

/// Weighted-centred, sqrt(w)-scaled data with the intercept removed.
///
/// All rows follow the time-sorted order of the source. Censored rows carry
/// zero weight and hence zero rows in `x_std`; their centred-but-unscaled
/// values are kept in `x_censored` / `y_censored` for the censoring
/// constraints.
struct StandardizedData {
  SurvivalDataset source;   // sorted, tail-corrected input
  KMWeightVector weights;
  Matrix x_std;
  Vector y_std;
  Vector x_means;
  double y_mean = 0.0;
  IndexSet uncensored_index;
  IndexSet censored_index;
  Matrix x_censored;        // centred, unscaled
  Vector y_censored;

  Index n() const { return x_std.rows(); }
  Index p() const { return x_std.cols(); }
  Index n_uncensored() const { return static_cast<Index>(uncensored_index.size()); }
  Index n_censored() const { return static_cast<Index>(censored_index.size()); }

  Matrix x_uncensored() const { return select_rows(x_std, uncensored_index); }
  Vector y_uncensored() const { return select_rows(y_std, uncensored_index); }

  /// Same centring and weights, restricted to `rows` (sorted-order indices).
  /// Used for cross-validation folds.
  StandardizedData subset(const IndexSet& rows) const;

  /// Same rows, restricted to covariate columns `cols`.
  StandardizedData restrict_columns(const IndexSet& cols) const;
};

StandardizedData weighted_standardize(const SurvivalDataset& sorted_data,
                                      const KMWeightVector& weights);

/// Sorts, applies the Efron correction, computes weights and standardizes.
StandardizedData prepare(const SurvivalDataset& data);

/// alpha = ybar_w - xbar_w . beta
double recover_intercept(const Vector& beta, const StandardizedData& std_data);

/// Reads a CSV with a header row containing `time` (positive, raw scale) and
/// `status` (0/1); every other column is a covariate, in file order. Times
/// are log-transformed. Errors carry the offending line number.
SurvivalDataset read_survival_csv(const std::string& path);
SurvivalDataset parse_survival_csv(std::istream& in);

/// Inverse of read_survival_csv: writes exp(times) in the `time` column.
void write_survival_csv(const SurvivalDataset& data, std::ostream& out);

}  // namespace survenet

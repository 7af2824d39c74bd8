#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "survenet/common.hpp"
#include "survenet/constrained_qp.hpp"
#include "survenet/enet_solvers.hpp"
#include "survenet/survival_core.hpp"

namespace survenet {

/// Tuning grids and cross-validation settings.
struct TuningGrid {
  std::vector<double> lambda2_grid{0.0, 0.6, 1.1, 1.7, 2.2, 2.8, 3.3, 3.9, 4.4, 5.0};
  // lambda0 = 0 voids the censoring constraints and is left out by default
  std::vector<double> lambda0_grid{1.0, 1.4, 1.8, 2.2, 2.6, 3.0};
  std::vector<double> t1_grid = default_t1_grid();
  int folds = 5;
  double gamma = 1.0;
  double varsigma = kDefaultVarsigma;
  std::uint64_t seed = 1;
  /// Re-estimate penalty weights on each training fold instead of once on
  /// the full data.
  bool cv_refit_weights = false;

  /// 0, 0.05, ..., 1
  static std::vector<double> default_t1_grid();

  /// Throws InputError for empty grids, negative values, t1 outside [0, 1]
  /// or fewer than two folds.
  void validate() const;
};

/// Overrides fields of `base` from a JSON object with keys lambda2_grid,
/// lambda0_grid, t1_grid, folds, gamma, varsigma, seed, cv_refit_weights.
/// Unknown keys are rejected.
TuningGrid parse_tuning_grid(const std::string& json_text, TuningGrid base = {});
std::string tuning_grid_to_json(const TuningGrid& grid);

/// Fold id in [0, K) for every row of `std_data`, stratified by censoring
/// status: each stratum is shuffled and dealt round-robin, so fold sizes
/// within a stratum differ by at most one and every fold holds an event.
std::vector<int> kfold_split(const StandardizedData& std_data, int folds, std::uint64_t seed);

/// Rows of `std_data` outside (`training_rows`) or inside (`fold_rows`) fold f.
IndexSet training_rows(const std::vector<int>& fold_of, int f);
IndexSet fold_rows(const std::vector<int>& fold_of, int f);

/// Sum over held-out uncensored rows of w_i (Y_i - X_i b^(-f))^2, i.e. squared
/// residuals of the weighted, centred data. `fold_betas[f]` is the fit that
/// excluded fold f. Throws InputError("degenerate fold") if a fold holds no
/// event.
double cv_score(const StandardizedData& std_data, const std::vector<int>& fold_of,
                const std::vector<Vector>& fold_betas);

/// n_u log(CV-S) + 2 k n_u / (n_u - k - 1). Throws InputError("score
/// undefined") when k >= n_u - 1 or CV-S < 0; CV-S = 0 gives -infinity.
double aicc_score(double cv_s, Index n_u, Index k);

/// Penalty weights for training data; used when weights are refitted per fold.
using WeightRefit = std::function<Vector(const StandardizedData&)>;

struct PathTuning {
  double t1 = 0.0;        // selected l1 fraction
  double lambda2 = 0.0;   // selected ridge level
  double cv_s = 0.0;      // CV-S at the selected pair
  FitResult fit;          // full-data refit at the selected pair
  Matrix cv_table;        // CV-S, rows = lambda2 grid, cols = t1 grid
};

/// K-fold cross-validation of a path method (Enet, AEnet or WEnet) over the
/// (lambda2, t1) grid. Ties go to the smaller t1, then the smaller lambda2.
PathTuning tune_path_method(const StandardizedData& std_data, Method method, const TuningGrid& grid,
                            const Vector& weights, const WeightRefit& refit = {});

struct CCScore {
  double lambda0 = 0.0;
  IndexSet predictor_set;
  double cv_s = 0.0;
  double aicc = 0.0;
};

struct CCSelection {
  double lambda0 = 0.0;
  double budget = 0.0;   // absolute l1 budget in solver coordinates
  double cv_s = 0.0;
  double aicc = 0.0;
  FitResult fit;         // averaged fold model on the selected predictor set
  std::vector<CCScore> scores;
};

/// Variable selection for AEnetCC / WEnetCC at a tuned (t1, lambda2): for
/// every lambda0, fit the full data, keep PS = {j : |b_j| > varsigma}, refit
/// on PS in each fold, average the fold coefficients, and score by AIC_c.
/// The budget is t1 times the l1 terminus of the matching path method on the
/// full data and is reused for the fold refits. The lowest score wins; ties
/// go to the smallest lambda0. An empty PS scores the null model with k = 0;
/// an undefined score counts as +infinity.
CCSelection select_cc_model(const StandardizedData& std_data, Method method, double t1, double lambda2,
                            const TuningGrid& grid, const AdaptiveWeights& weights,
                            const QPSettings& settings = {});

/// AEnet weights 1/|b0|^gamma from the CV-tuned elastic net.
AdaptiveWeights adaptive_weights_from_enet(const StandardizedData& std_data, const TuningGrid& grid);

enum class WenetWeightMode { Auto, GehanSe, BootstrapSe };

std::string to_string(WenetWeightMode m);
WenetWeightMode wenet_weight_mode_from_string(const std::string& name);

struct WeightOptions {
  WenetWeightMode mode = WenetWeightMode::Auto;  // Auto: gehan_se when n_u > p
  int bootstrap_b = 500;
  std::uint64_t seed = 1;
};

/// WEnet standard-error weights. The bootstrap_se route resamples the elastic
/// net at its CV-tuned (t1, lambda2).
AdaptiveWeights wenet_weights(const StandardizedData& std_data, const TuningGrid& grid,
                              const WeightOptions& options);

/// Everything a fully tuned fit produces.
struct TunedFit {
  Method method = Method::Enet;
  FitResult fit;
  AdaptiveWeights weights;
  double t1 = 0.0;        // l1 fraction chosen by CV
  double lambda2 = 0.0;
  Matrix cv_table;        // path-method CV-S over the (lambda2, t1) grid
  double cv_s = 0.0;
  std::optional<double> aicc;
  std::optional<CCSelection> cc;
};

/// prepare -> penalty weights -> CV tuning -> (constrained selection) -> fit.
TunedFit fit_tuned(const StandardizedData& std_data, Method method, const TuningGrid& grid,
                   const WeightOptions& weight_options = {}, const QPSettings& settings = {});

/// Refit `method` at fixed tuning values, without cross-validation. Used for
/// bootstrap replicates and held-out evaluation.
FitResult refit_fixed(const StandardizedData& std_data, Method method, double t1, double lambda2,
                      std::optional<double> lambda0, const AdaptiveWeights& weights, double varsigma,
                      const QPSettings& settings = {});

}  // namespace survenet

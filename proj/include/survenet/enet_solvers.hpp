#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "survenet/common.hpp"
#include "survenet/path_solver.hpp"
#include "survenet/survival_core.hpp"

namespace survenet {

enum class WeightSource { Uniform, InverseInitialCoefficient, BootstrapSe, GehanSe };

std::string to_string(WeightSource s);

/// Per-coefficient penalty weights. For AEnet these are 1/|beta0_j|^gamma;
/// for WEnet they are standard errors of an initial estimator.
struct AdaptiveWeights {
  Vector w;
  WeightSource source = WeightSource::Uniform;
  double gamma = 1.0;

  static AdaptiveWeights uniform(Index p) { return {Vector::Ones(p), WeightSource::Uniform, 0.0}; }
};

/// Largest adaptive weight; zero initial coefficients map here.
inline constexpr double kAdaptiveWeightCap = 1e6;
/// Smallest standard-error weight for WEnet.
inline constexpr double kStandardErrorFloor = 1e-6;
/// Default precision threshold for selecting variables from QP fits.
inline constexpr double kDefaultVarsigma = 1e-5;

/// Result of any of the five estimators.
///
/// Penalty levels follow the folded convention: the sample-size factors on
/// the WEnet penalties are absorbed into lambda1 and lambda2, so every
/// method reads the same lasso form 1/2||y - Xb||^2 + lambda1 sum w|b| +
/// lambda2/2 sum (r b)^2.
struct FitResult {
  Method method = Method::Enet;
  Vector beta;                    // original covariate scale
  double intercept = 0.0;
  std::optional<double> lambda1;  // penalty level, when fitted at a lambda
  std::optional<double> t1;       // l1 fraction (path methods) or budget (CC)
  double lambda2 = 0.0;
  std::optional<double> lambda0;
  IndexSet selected;
  std::optional<Vector> xi;
  std::optional<double> constraint_violation;  // CC fits: worst censoring-row shortfall
  std::optional<double> solver_residual;       // CC fits: QP KKT residual
  Vector penalty_weights;

  // Intermediate coordinates kept for inspection.
  Vector beta_naive;     // minimiser of the naive (unrescaled) objective
  Vector beta_starred;   // WEnet: sqrt(1+lambda2) * naive; otherwise naive
  double output_scale = 1.0;  // beta = output_scale * beta_starred
};

/// {j : beta_j != 0}
IndexSet nonzero_support(const Vector& beta);
/// {j : |beta_j| > varsigma}
IndexSet thresholded_support(const Vector& beta, double varsigma);

/// Augmented design stack(X; sqrt(lambda2) * diag(ridge)) and response
/// stack(y; 0). With ridge = 1 this is the elastic-net-to-lasso transform.
Matrix augmented_design(const Matrix& x, double lambda2, const Vector& ridge);
Vector augmented_response(const Vector& y, Index p);

/// Lasso path of a path-based estimator (Enet, AEnet, WEnet) at fixed lambda2,
/// together with the maps from solver coordinates back to coefficients.
class PenalizedPath {
 public:
  PenalizedPath(Method method, const Matrix& x_u, const Vector& y_u, double lambda2,
                const Vector& weights, const PathOptions& options = {});

  Method method() const { return method_; }
  double lambda2() const { return lambda2_; }
  const Vector& weights() const { return weights_; }
  const LassoPath& lasso() const { return path_; }
  const Matrix& design() const { return design_; }
  const Vector& response() const { return response_; }

  /// Factor turning a user lambda1 into the solver's lambda (WEnet: 1/sqrt(1+l2)).
  double lambda_scale() const { return lambda_scale_; }
  /// naive_j = solver_j * solver_to_naive_j
  const Vector& solver_to_naive() const { return solver_to_naive_; }

  Vector naive_at_fraction(double t1) const;
  Vector naive_at_lambda(double lambda1) const;

  /// l1 norm of the path terminus in solver coordinates; t1 fractions and
  /// constrained budgets are measured against it.
  double terminus_l1() const { return path_.terminus_l1(); }

  /// Builds a FitResult from naive coefficients.
  FitResult make_fit(const Vector& naive, const StandardizedData* std_data) const;

 private:
  Method method_;
  double lambda2_;
  Vector weights_;
  Matrix design_;
  Vector response_;
  double lambda_scale_ = 1.0;
  Vector solver_to_naive_;
  LassoPath path_;
};

/// Naive elastic net on the uncensored weighted rows, returned as
/// (1 + lambda2) * naive.
FitResult enet_fit(const StandardizedData& std_data, double lambda1, double lambda2);

/// Adaptive elastic net: columns of the augmented design scaled by 1/w_hat,
/// lasso at lambda1, coefficients (1 + lambda2) * b / w_hat.
FitResult aenet_fit(const StandardizedData& std_data, double lambda1, double lambda2,
                    const AdaptiveWeights& w_hat);

/// Weighted elastic net: design stack(X; sqrt(lambda2) W) / sqrt(1 + lambda2),
/// columns scaled by 1/w, lasso at lambda1 / sqrt(1 + lambda2), unscaled and
/// multiplied by sqrt(1 + lambda2).
FitResult wenet_fit(const StandardizedData& std_data, double lambda1, double lambda2,
                    const AdaptiveWeights& w);

/// Any path method at an l1 fraction t1 of its path terminus.
FitResult fit_path_method_at_fraction(const StandardizedData& std_data, Method method,
                                      double t1, double lambda2, const Vector& weights);

/// w_j = 1 / |beta0_j|^gamma, zeros mapped to kAdaptiveWeightCap. gamma = 0
/// gives all ones. Throws InputError("uninformative initial estimator") when
/// beta0 is identically zero and gamma > 0.
AdaptiveWeights adaptive_weights(const Vector& initial, double gamma);

/// Standard errors of the Gehan estimator over B bootstrap resamples (with
/// replacement) of the raw data, floored at kStandardErrorFloor. Requires
/// more events than covariates.
AdaptiveWeights wenet_weights_gehan(const SurvivalDataset& data, int bootstrap_b, std::uint64_t seed);

/// Standard errors of the elastic net at (t1, lambda2) over B resamples (with
/// replacement) of the uncensored weighted rows, floored at
/// kStandardErrorFloor.
AdaptiveWeights wenet_weights_bootstrap(const StandardizedData& std_data, double t1, double lambda2,
                                        int bootstrap_b, std::uint64_t seed);

}  // namespace survenet

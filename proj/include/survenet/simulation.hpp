#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "survenet/common.hpp"
#include "survenet/model_selection.hpp"
#include "survenet/survival_core.hpp"

namespace survenet {

enum class ErrorLaw { StdNormal, StdLogWeibull };

std::string to_string(ErrorLaw law);
/// "lognormal" or "weibull"
ErrorLaw error_law_from_string(const std::string& name);

/// Y = alpha + X beta + sigma * eps with X ~ U(0, 1)^p.
struct SimDesign {
  Index n = 100;
  Index p = 40;
  Vector beta_true;
  double alpha = 0.0;
  ErrorLaw error_law = ErrorLaw::StdNormal;
  double sigma = 1.0;
  double rho = 0.0;               // equicorrelation of the covariates
  double target_censoring = 30.0; // percent
  std::uint64_t seed = 1;

  void validate() const;
};

/// n = 100, p = 40, beta = (5 x 5, 2 x 5, 0 x 30), alpha = 0.
SimDesign sim1_design(double rho = 0.0, ErrorLaw law = ErrorLaw::StdNormal, double censoring = 30.0);
/// n = 100, p = 120, beta = (4 x 20, 0 x 100), alpha = 1.
SimDesign sim2_design(double rho = 0.0, ErrorLaw law = ErrorLaw::StdNormal, double censoring = 30.0);

/// Uniform(0, 1) covariates. For rho > 0 a Gaussian copula with latent
/// equicorrelation 2 sin(pi rho / 6), which makes the uniforms' correlation
/// exactly rho.
Matrix gen_covariates(Index n, Index p, double rho, std::uint64_t seed);

constexpr double kLogWeibullShape = 5.0;
/// Mean and standard deviation of log W for W ~ Weibull(shape 5, scale 1).
double log_weibull_mean();
double log_weibull_sd();

/// (log W - mean) / sd for W ~ Weibull(5, 1).
Vector std_log_weibull_error(Index m, std::uint64_t seed);

/// Complete data: true log-times, every status 1.
SurvivalDataset gen_aft(const SimDesign& design);

/// Location shift c0 such that log C ~ N(c0 sqrt(1 + sigma), 1 + sigma^2)
/// censors `target_percent` of the design's true log-times. The rate is
/// averaged over a fixed internal sample of 2e5 log-times, with P(C < T | T)
/// evaluated in closed form, and c0 found by bisection.
double calibrate_c0(const SimDesign& design, double target_percent);

struct CensoredSample {
  SurvivalDataset data;        // observed min(T, C), tail-corrected status
  Vector true_times;           // uncensored log-times
  double censoring_rate = 0.0; // fraction censored before the tail correction
};

CensoredSample apply_censoring(const SurvivalDataset& complete, double c0, const SimDesign& design,
                               std::uint64_t seed);

/// gen_aft followed by apply_censoring with a replicate-specific stream.
CensoredSample simulate(const SimDesign& design, double c0);

/// Selected covariates for one simulated data set.
using SelectionMethod = std::function<IndexSet(const SurvivalDataset&, std::uint64_t seed)>;

struct StudyMethod {
  std::string name;
  SelectionMethod select;
};

/// Full tuning of `method` with `grid` (seeded per replicate).
StudyMethod tuned_study_method(Method method, const TuningGrid& grid, const WeightOptions& weights = {});

struct Block {
  std::string name;  // Block1, Block2, ...; a trailing '*' marks a zero block
  Index first = 0;
  Index size = 0;
  double value = 0.0;
};

/// Consecutive runs of equal true coefficients.
std::vector<Block> coefficient_blocks(const Vector& beta);

struct BlockSummary {
  std::string block;
  std::string method;
  double min = 0.0;   // selection frequencies in percent of successful replicates
  double mean = 0.0;
  double max = 0.0;
};

struct StudyResult {
  SimDesign design;
  double c0 = 0.0;
  int replicates = 0;
  std::vector<std::string> methods;
  Matrix counts;                             // methods x p selection counts
  std::vector<int> successes;                // per method
  std::vector<std::vector<std::string>> failures;  // per method, one message per failed replicate
  std::vector<BlockSummary> blocks;
  double mean_censoring = 0.0;
};

StudyResult selection_frequency_study(const SimDesign& design, const std::vector<StudyMethod>& methods,
                                      int replicates, std::uint64_t seed);

/// CSV columns block,method,censoring,rho,model,min,mean,max.
void write_study_csv(std::ostream& out, const StudyResult& result);

/// floor(3 n^(2/3))
Index default_sis_dn(Index n);

/// Indices of the d_n covariates with the largest absolute correlation between
/// the weighted standardized column and response over the uncensored rows,
/// best first. Ties go to the lower index.
IndexSet sis_screen(const StandardizedData& std_data, Index d_n);

}  // namespace survenet

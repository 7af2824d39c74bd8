#include "survenet/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>

#include "survenet/parallel.hpp"

namespace survenet {

namespace {

constexpr std::uint64_t kCalibrationSeed = 0x63616c6962ULL;
constexpr Index kCalibrationDraws = 200000;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Uniform on the open interval (0, 1).
double open_uniform(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (;;) {
    const double v = u(rng);
    if (v > 0.0) return v;
  }
}

void fill_covariate_row(std::mt19937_64& rng, double rho, Eigen::Ref<Vector> row) {
  if (rho == 0.0) {
    for (Index j = 0; j < row.size(); ++j) row(j) = open_uniform(rng);
    return;
  }
  const double rho_z = 2.0 * std::sin(std::numbers::pi * rho / 6.0);
  const double a = std::sqrt(rho_z), b = std::sqrt(1.0 - rho_z);
  std::normal_distribution<double> g;
  const double shared = g(rng);
  for (Index j = 0; j < row.size(); ++j) {
    const double u = normal_cdf(a * shared + b * g(rng));
    // Phi can round to 0 or 1 far in the tails
    row(j) = std::clamp(u, 1e-300, std::nextafter(1.0, 0.0));
  }
}

double draw_error(std::mt19937_64& rng, ErrorLaw law) {
  if (law == ErrorLaw::StdNormal) return std::normal_distribution<double>()(rng);
  const double log_w = std::log(-std::log(open_uniform(rng))) / kLogWeibullShape;
  return (log_w - log_weibull_mean()) / log_weibull_sd();
}

void check_rho(double rho) {
  if (!(rho >= 0.0 && rho < 1.0)) throw InputError("correlation must lie in [0, 1)");
}

}  // namespace

std::string to_string(ErrorLaw law) { return law == ErrorLaw::StdNormal ? "lognormal" : "weibull"; }

ErrorLaw error_law_from_string(const std::string& name) {
  if (name == "lognormal") return ErrorLaw::StdNormal;
  if (name == "weibull") return ErrorLaw::StdLogWeibull;
  throw InputError("unknown model '" + name + "' (expected lognormal or weibull)");
}

void SimDesign::validate() const {
  if (n < 1 || p < 1) throw InputError("design needs n >= 1 and p >= 1");
  if (beta_true.size() != p) throw InputError("beta_true must have length p");
  check_rho(rho);
  if (!(target_censoring > 0.0 && target_censoring < 100.0)) throw InputError("censoring percent must lie in (0, 100)");
  if (!(sigma >= 0.0) || !std::isfinite(sigma) || !std::isfinite(alpha) || !beta_true.allFinite())
    throw InputError("design parameters must be finite");
}

SimDesign sim1_design(double rho, ErrorLaw law, double censoring) {
  SimDesign d;
  d.n = 100;
  d.p = 40;
  d.beta_true = Vector::Zero(40);
  d.beta_true.head(5).setConstant(5.0);
  d.beta_true.segment(5, 5).setConstant(2.0);
  d.alpha = 0.0;
  d.error_law = law;
  d.rho = rho;
  d.target_censoring = censoring;
  return d;
}

SimDesign sim2_design(double rho, ErrorLaw law, double censoring) {
  SimDesign d;
  d.n = 100;
  d.p = 120;
  d.beta_true = Vector::Zero(120);
  d.beta_true.head(20).setConstant(4.0);
  d.alpha = 1.0;
  d.error_law = law;
  d.rho = rho;
  d.target_censoring = censoring;
  return d;
}

Matrix gen_covariates(Index n, Index p, double rho, std::uint64_t seed) {
  check_rho(rho);
  std::mt19937_64 rng(seed);
  Matrix x(n, p);
  Vector row(p);
  for (Index i = 0; i < n; ++i) {
    fill_covariate_row(rng, rho, row);
    x.row(i) = row.transpose();
  }
  return x;
}

double log_weibull_mean() { return -std::numbers::egamma / kLogWeibullShape; }

double log_weibull_sd() { return std::numbers::pi / (kLogWeibullShape * std::sqrt(6.0)); }

Vector std_log_weibull_error(Index m, std::uint64_t seed) {
  if (m < 1) throw InputError("need at least one draw");
  std::mt19937_64 rng(seed);
  Vector e(m);
  for (Index i = 0; i < m; ++i) e(i) = draw_error(rng, ErrorLaw::StdLogWeibull);
  return e;
}

SurvivalDataset gen_aft(const SimDesign& design) {
  design.validate();
  SurvivalDataset d;
  d.covariates = gen_covariates(design.n, design.p, design.rho, derive_seed(design.seed, 1));
  std::mt19937_64 rng(derive_seed(design.seed, 2));
  d.times.resize(design.n);
  for (Index i = 0; i < design.n; ++i)
    d.times(i) = design.alpha + d.covariates.row(i).dot(design.beta_true) + design.sigma * draw_error(rng, design.error_law);
  d.status = Eigen::VectorXi::Ones(design.n);
  for (Index j = 0; j < design.p; ++j) d.names.push_back("x" + std::to_string(j + 1));
  return d;
}

double calibrate_c0(const SimDesign& design, double target_percent) {
  SimDesign d = design;
  d.target_censoring = target_percent;
  d.validate();
  std::mt19937_64 rng(kCalibrationSeed);
  Vector row(d.p), y(kCalibrationDraws);
  for (Index k = 0; k < kCalibrationDraws; ++k) {
    fill_covariate_row(rng, d.rho, row);
    y(k) = d.alpha + row.dot(d.beta_true) + d.sigma * draw_error(rng, d.error_law);
  }
  const double shift = std::sqrt(1.0 + d.sigma), spread = std::sqrt(1.0 + d.sigma * d.sigma);
  const double target = target_percent / 100.0;
  auto rate = [&](double c0) {
    double s = 0.0;
    for (Index k = 0; k < kCalibrationDraws; ++k) s += normal_cdf((y(k) - c0 * shift) / spread);
    return s / static_cast<double>(kCalibrationDraws);
  };

  // censoring rate falls as c0 grows
  const double centre = y.mean() / shift;
  double lo = centre - 10.0, hi = centre + 10.0;
  for (int expand = 0; !(rate(lo) > target && rate(hi) < target); ++expand) {
    if (expand >= 40) throw InputError("censoring calibration: bracket failure");
    const double half = hi - lo;
    lo -= half;
    hi += half;
  }
  // 1e-7 in c0 moves the rate by far less than the Monte Carlo error
  while (hi - lo > 1e-7) {
    const double mid = 0.5 * (lo + hi);
    (rate(mid) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

CensoredSample apply_censoring(const SurvivalDataset& complete, double c0, const SimDesign& design,
                               std::uint64_t seed) {
  complete.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  const double shift = std::sqrt(1.0 + design.sigma), spread = std::sqrt(1.0 + design.sigma * design.sigma);
  CensoredSample out;
  out.true_times = complete.times;
  SurvivalDataset d = complete;
  Index censored = 0;
  for (Index i = 0; i < d.n(); ++i) {
    const double log_c = c0 * shift + spread * g(rng);
    if (complete.times(i) <= log_c) {
      d.status(i) = 1;
    } else {
      d.times(i) = log_c;
      d.status(i) = 0;
      ++censored;
    }
  }
  out.censoring_rate = static_cast<double>(censored) / static_cast<double>(d.n());
  out.data = efron_tail_correction(d);
  return out;
}

CensoredSample simulate(const SimDesign& design, double c0) {
  return apply_censoring(gen_aft(design), c0, design, derive_seed(design.seed, 3));
}

StudyMethod tuned_study_method(Method method, const TuningGrid& grid, const WeightOptions& weights) {
  StudyMethod m;
  m.name = to_string(method);
  m.select = [method, grid, weights](const SurvivalDataset& data, std::uint64_t seed) {
    TuningGrid g = grid;
    g.seed = seed;
    WeightOptions w = weights;
    w.seed = derive_seed(seed, 1);
    return fit_tuned(prepare(data), method, g, w).fit.selected;
  };
  return m;
}

std::vector<Block> coefficient_blocks(const Vector& beta) {
  std::vector<Block> blocks;
  Index j = 0;
  while (j < beta.size()) {
    Block b;
    b.first = j;
    b.value = beta(j);
    while (j < beta.size() && beta(j) == b.value) ++j;
    b.size = j - b.first;
    b.name = "Block" + std::to_string(blocks.size() + 1) + (b.value == 0.0 ? "*" : "");
    blocks.push_back(b);
  }
  return blocks;
}

StudyResult selection_frequency_study(const SimDesign& design, const std::vector<StudyMethod>& methods,
                                      int replicates, std::uint64_t seed) {
  design.validate();
  if (replicates < 1) throw InputError("need at least one replicate");
  if (methods.empty()) throw InputError("need at least one method");
  const std::size_t nm = methods.size();
  StudyResult out;
  out.design = design;
  out.replicates = replicates;
  out.c0 = calibrate_c0(design, design.target_censoring);
  for (const auto& m : methods) out.methods.push_back(m.name);

  struct Outcome {
    bool ok = false;
    IndexSet selected;
    std::string error;
  };
  std::vector<Outcome> outcomes(static_cast<std::size_t>(replicates) * nm);
  std::vector<double> rates(static_cast<std::size_t>(replicates), 0.0);
  parallel_for(static_cast<std::size_t>(replicates), [&](std::size_t r) {
    SimDesign d = design;
    d.seed = derive_seed(seed, r);
    const CensoredSample sample = simulate(d, out.c0);
    rates[r] = sample.censoring_rate;
    for (std::size_t m = 0; m < nm; ++m) {
      Outcome& o = outcomes[r * nm + m];
      try {
        o.selected = methods[m].select(sample.data, derive_seed(d.seed, 100 + m));
        o.ok = true;
      } catch (const std::exception& e) {
        o.error = "replicate " + std::to_string(r) + ": " + e.what();
      }
    }
  });

  out.counts = Matrix::Zero(static_cast<Index>(nm), design.p);
  out.successes.assign(nm, 0);
  out.failures.assign(nm, {});
  for (std::size_t r = 0; r < static_cast<std::size_t>(replicates); ++r)
    for (std::size_t m = 0; m < nm; ++m) {
      const Outcome& o = outcomes[r * nm + m];
      if (!o.ok) {
        out.failures[m].push_back(o.error);
        continue;
      }
      ++out.successes[m];
      for (Index j : o.selected) out.counts(static_cast<Index>(m), j) += 1.0;
    }
  out.mean_censoring = std::accumulate(rates.begin(), rates.end(), 0.0) / static_cast<double>(replicates);

  for (const Block& b : coefficient_blocks(design.beta_true))
    for (std::size_t m = 0; m < nm; ++m) {
      const double denom = out.successes[m] > 0 ? out.successes[m] : 1;
      const Vector freq = 100.0 * out.counts.row(static_cast<Index>(m)).segment(b.first, b.size).transpose() / denom;
      out.blocks.push_back({b.name, methods[m].name, freq.minCoeff(), freq.mean(), freq.maxCoeff()});
    }
  return out;
}

void write_study_csv(std::ostream& out, const StudyResult& result) {
  const auto precision = out.precision(10);
  out << "block,method,censoring,rho,model,min,mean,max\n";
  for (const BlockSummary& b : result.blocks)
    out << b.block << ',' << b.method << ',' << result.design.target_censoring << ',' << result.design.rho << ','
        << to_string(result.design.error_law) << ',' << b.min << ',' << b.mean << ',' << b.max << '\n';
  out.precision(precision);
}

Index default_sis_dn(Index n) {
  if (n < 1) throw InputError("n must be positive");
  const double c = std::cbrt(static_cast<double>(n));
  return static_cast<Index>(std::floor(3.0 * c * c + 1e-9));
}

IndexSet sis_screen(const StandardizedData& std_data, Index d_n) {
  const Index p = std_data.p();
  if (d_n <= 0) throw InputError("d_n must be positive");
  if (d_n > p) throw InputError("d_n exceeds the number of covariates");
  const double ny = std_data.y_std.norm();
  Vector score = Vector::Zero(p);
  for (Index j = 0; j < p; ++j) {
    const double nx = std_data.x_std.col(j).norm();
    if (nx > 0.0 && ny > 0.0) score(j) = std::abs(std_data.x_std.col(j).dot(std_data.y_std)) / (nx * ny);
  }
  IndexSet order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return score(a) > score(b); });
  order.resize(static_cast<std::size_t>(d_n));
  return order;
}

}  // namespace survenet

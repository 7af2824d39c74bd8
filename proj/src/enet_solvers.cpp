#include "survenet/enet_solvers.hpp"

#include <cmath>
#include <random>

#include "survenet/gehan.hpp"
#include "survenet/parallel.hpp"

namespace survenet {

std::string to_string(WeightSource s) {
  switch (s) {
    case WeightSource::Uniform: return "uniform";
    case WeightSource::InverseInitialCoefficient: return "inverse_initial_coefficient";
    case WeightSource::BootstrapSe: return "bootstrap_se";
    case WeightSource::GehanSe: return "gehan_se";
  }
  return "unknown";
}

IndexSet nonzero_support(const Vector& beta) {
  IndexSet s;
  for (Index j = 0; j < beta.size(); ++j)
    if (beta(j) != 0.0) s.push_back(j);
  return s;
}

IndexSet thresholded_support(const Vector& beta, double varsigma) {
  IndexSet s;
  for (Index j = 0; j < beta.size(); ++j)
    if (std::abs(beta(j)) > varsigma) s.push_back(j);
  return s;
}

Matrix augmented_design(const Matrix& x, double lambda2, const Vector& ridge) {
  if (ridge.size() != x.cols()) throw InputError("augmented_design: ridge length mismatch");
  if (!(lambda2 >= 0.0)) throw InputError("lambda2 must be nonnegative");
  const Index n = x.rows(), p = x.cols();
  Matrix out = Matrix::Zero(n + p, p);
  out.topRows(n) = x;
  out.bottomRows(p).diagonal() = std::sqrt(lambda2) * ridge;
  return out;
}

Vector augmented_response(const Vector& y, Index p) {
  Vector out = Vector::Zero(y.size() + p);
  out.head(y.size()) = y;
  return out;
}

PenalizedPath::PenalizedPath(Method method, const Matrix& x_u, const Vector& y_u, double lambda2,
                             const Vector& weights, const PathOptions& options)
    : method_(method), lambda2_(lambda2) {
  if (is_constrained(method)) throw InputError("PenalizedPath: constrained methods are fitted by QP");
  const Index p = x_u.cols();
  if (x_u.rows() != y_u.size()) throw InputError("dimension mismatch between design and response");
  if (!(lambda2 >= 0.0) || !std::isfinite(lambda2)) throw InputError("lambda2 must be nonnegative");
  if (method == Method::Enet) {
    weights_ = Vector::Ones(p);
  } else {
    if (weights.size() != p) throw InputError("penalty weight length does not match covariates");
    if (!weights.allFinite() || weights.minCoeff() <= 0.0) throw InputError("penalty weights must be positive");
    weights_ = weights;
  }

  const double root = std::sqrt(1.0 + lambda2);
  const Vector ridge = method == Method::WEnet ? weights_ : Vector::Ones(p);
  // zero augmentation rows would only change the row count, not the problem
  if (lambda2 > 0.0) {
    design_ = augmented_design(x_u, lambda2, ridge);
    response_ = augmented_response(y_u, p);
  } else {
    design_ = x_u;
    response_ = y_u;
  }
  if (method == Method::WEnet) {
    design_ /= root;
    lambda_scale_ = 1.0 / root;
    solver_to_naive_ = weights_.cwiseInverse() / root;
  } else {
    solver_to_naive_ = weights_.cwiseInverse();
  }
  design_ = design_ * weights_.cwiseInverse().asDiagonal();
  // A capped weight stands for an infinite one. Left in, such a column would
  // still enter near lambda = 0 with a huge solver coefficient and dominate
  // the terminus that t1 fractions are measured against.
  for (Index j = 0; j < p; ++j)
    if (weights_(j) >= kAdaptiveWeightCap) design_.col(j).setZero();

  PathOptions solver_options = options;
  solver_options.lambda_min = options.lambda_min;
  path_ = lasso_path(design_, response_, solver_options);
}

Vector PenalizedPath::naive_at_fraction(double t1) const {
  return solve_at(path_, t1).cwiseProduct(solver_to_naive_);
}

Vector PenalizedPath::naive_at_lambda(double lambda1) const {
  return solve_at_lambda(path_, lambda1 * lambda_scale_).cwiseProduct(solver_to_naive_);
}

FitResult PenalizedPath::make_fit(const Vector& naive, const StandardizedData* std_data) const {
  FitResult fit;
  fit.method = method_;
  fit.lambda2 = lambda2_;
  fit.penalty_weights = weights_;
  fit.beta_naive = naive;
  if (method_ == Method::WEnet) {
    fit.output_scale = std::sqrt(1.0 + lambda2_);
    fit.beta_starred = fit.output_scale * naive;
  } else {
    fit.output_scale = 1.0 + lambda2_;
    fit.beta_starred = naive;
  }
  fit.beta = fit.output_scale * fit.beta_starred;
  fit.selected = nonzero_support(fit.beta);
  if (std_data != nullptr) fit.intercept = recover_intercept(fit.beta, *std_data);
  return fit;
}

namespace {

FitResult fit_at_lambda(const StandardizedData& std_data, Method method, double lambda1, double lambda2,
                        const Vector& weights) {
  if (!(lambda1 >= 0.0)) throw InputError("lambda1 must be nonnegative");
  const Matrix xu = std_data.x_uncensored();
  const Vector yu = std_data.y_uncensored();
  // only the part of the path above lambda1 is needed
  const double scale = method == Method::WEnet ? 1.0 / std::sqrt(1.0 + std::max(lambda2, 0.0)) : 1.0;
  PathOptions options;
  options.lambda_min = lambda1 * scale;
  PenalizedPath path(method, xu, yu, lambda2, weights, options);
  FitResult fit = path.make_fit(path.naive_at_lambda(lambda1), &std_data);
  fit.lambda1 = lambda1;
  return fit;
}

}  // namespace

FitResult enet_fit(const StandardizedData& std_data, double lambda1, double lambda2) {
  return fit_at_lambda(std_data, Method::Enet, lambda1, lambda2, Vector::Ones(std_data.p()));
}

FitResult aenet_fit(const StandardizedData& std_data, double lambda1, double lambda2,
                    const AdaptiveWeights& w_hat) {
  return fit_at_lambda(std_data, Method::AEnet, lambda1, lambda2, w_hat.w);
}

FitResult wenet_fit(const StandardizedData& std_data, double lambda1, double lambda2, const AdaptiveWeights& w) {
  return fit_at_lambda(std_data, Method::WEnet, lambda1, lambda2, w.w);
}

FitResult fit_path_method_at_fraction(const StandardizedData& std_data, Method method, double t1,
                                      double lambda2, const Vector& weights) {
  PenalizedPath path(method, std_data.x_uncensored(), std_data.y_uncensored(), lambda2, weights);
  FitResult fit = path.make_fit(path.naive_at_fraction(t1), &std_data);
  fit.t1 = t1;
  return fit;
}

AdaptiveWeights adaptive_weights(const Vector& initial, double gamma) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw InputError("gamma must be nonnegative");
  if (!initial.allFinite()) throw InputError("initial estimator is not finite");
  AdaptiveWeights out;
  out.source = WeightSource::InverseInitialCoefficient;
  out.gamma = gamma;
  out.w = Vector::Ones(initial.size());
  if (gamma == 0.0) return out;
  if (initial.size() == 0 || initial.cwiseAbs().maxCoeff() == 0.0)
    throw InputError("uninformative initial estimator");
  for (Index j = 0; j < initial.size(); ++j) {
    const double a = std::abs(initial(j));
    out.w(j) = a == 0.0 ? kAdaptiveWeightCap : std::min(kAdaptiveWeightCap, std::pow(a, -gamma));
  }
  return out;
}

namespace {

Vector column_sd(const Matrix& draws) {
  const Index b = draws.rows();
  const Eigen::RowVectorXd mean = draws.colwise().mean();
  const Matrix centred = draws.rowwise() - mean;
  return (centred.colwise().squaredNorm() / static_cast<double>(b - 1)).cwiseSqrt().transpose();
}

}  // namespace

AdaptiveWeights wenet_weights_gehan(const SurvivalDataset& data, int bootstrap_b, std::uint64_t seed) {
  if (bootstrap_b < 2) throw InputError("bootstrap needs B >= 2");
  data.validate();
  const Index n = data.n(), p = data.p();
  if (data.events() <= p) throw InputError("gehan_se weights need more events than covariates (p >= n)");
  const GehanFit full = gehan_fit(data);

  Matrix draws(bootstrap_b, p);
  parallel_for(static_cast<std::size_t>(bootstrap_b), [&](std::size_t b) {
    std::mt19937_64 rng(derive_seed(seed, b));
    std::uniform_int_distribution<Index> pick(0, n - 1);
    for (int attempt = 0;; ++attempt) {
      IndexSet rows(static_cast<std::size_t>(n));
      for (auto& r : rows) r = pick(rng);
      SurvivalDataset resample = data.subset(rows);
      if (resample.events() <= p) {
        if (attempt >= 10) throw InputError("gehan_se bootstrap: resamples repeatedly lack events");
        continue;
      }
      GehanFit fit;
      try {
        fit = gehan_fit(resample, {}, &full.beta);
      } catch (const SolverError& e) {
        fit.beta = e.best_iterate();
      }
      draws.row(static_cast<Index>(b)) = fit.beta.transpose();
      break;
    }
  });
  AdaptiveWeights out;
  out.source = WeightSource::GehanSe;
  out.gamma = 0.0;
  out.w = column_sd(draws).cwiseMax(kStandardErrorFloor);
  return out;
}

AdaptiveWeights wenet_weights_bootstrap(const StandardizedData& std_data, double t1, double lambda2,
                                        int bootstrap_b, std::uint64_t seed) {
  if (bootstrap_b < 2) throw InputError("bootstrap needs B >= 2");
  const Matrix xu = std_data.x_uncensored();
  const Vector yu = std_data.y_uncensored();
  const Index nu = xu.rows(), p = xu.cols();
  if (nu < 1) throw InputError("bootstrap_se weights need at least one event");
  Matrix draws(bootstrap_b, p);
  parallel_for(static_cast<std::size_t>(bootstrap_b), [&](std::size_t b) {
    std::mt19937_64 rng(derive_seed(seed, b));
    std::uniform_int_distribution<Index> pick(0, nu - 1);
    IndexSet rows(static_cast<std::size_t>(nu));
    for (auto& r : rows) r = pick(rng);
    PenalizedPath path(Method::Enet, select_rows(xu, rows), select_rows(yu, rows), lambda2, Vector::Ones(p));
    draws.row(static_cast<Index>(b)) = ((1.0 + lambda2) * path.naive_at_fraction(t1)).transpose();
  });
  AdaptiveWeights out;
  out.source = WeightSource::BootstrapSe;
  out.gamma = 0.0;
  out.w = column_sd(draws).cwiseMax(kStandardErrorFloor);
  return out;
}

}  // namespace survenet

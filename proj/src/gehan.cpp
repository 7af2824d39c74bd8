#include "survenet/gehan.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace survenet {

namespace {

void check_dims(const SurvivalDataset& data, const Vector& beta) {
  data.validate();
  if (beta.size() != data.p()) throw InputError("gehan: coefficient length does not match covariates");
}

// Differences over ordered pairs (i, k), i an event and k != i:
// a_ik = dy - dx^T b with dy = Y_i - Y_k and dx = X_i - X_k.
struct PairDifferences {
  Vector dy;
  Matrix dx;

  explicit PairDifferences(const SurvivalDataset& data) {
    const Index n = data.n();
    const Index m = data.events() * (n - 1);
    dy.resize(m);
    dx.resize(m, data.p());
    Index row = 0;
    for (Index i = 0; i < n; ++i) {
      if (data.status(i) != 1) continue;
      for (Index k = 0; k < n; ++k) {
        if (k == i) continue;
        dy(row) = data.times(i) - data.times(k);
        dx.row(row) = data.covariates.row(i) - data.covariates.row(k);
        ++row;
      }
    }
  }
};

double smoothed_value(const Vector& a, double eps) {
  return 0.5 * ((a.array().square() + eps * eps).sqrt() - a.array()).sum();
}

double standard_deviation(const Vector& v) {
  if (v.size() < 2) return 0.0;
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

}  // namespace

double gehan_loss(const SurvivalDataset& data, const Vector& beta) {
  check_dims(data, beta);
  const Vector e = data.times - data.covariates * beta;
  double total = 0.0;
  for (Index i = 0; i < data.n(); ++i) {
    if (data.status(i) != 1) continue;
    for (Index k = 0; k < data.n(); ++k) {
      const double a = e(i) - e(k);
      if (a < 0.0) total += -a;
    }
  }
  return total;
}

Vector gehan_estimating_function(const SurvivalDataset& data, const Vector& beta) {
  check_dims(data, beta);
  const Vector e = data.times - data.covariates * beta;
  Vector u = Vector::Zero(data.p());
  for (Index i = 0; i < data.n(); ++i) {
    if (data.status(i) != 1) continue;
    for (Index k = 0; k < data.n(); ++k) {
      if (e(i) <= e(k)) u += (data.covariates.row(i) - data.covariates.row(k)).transpose();
    }
  }
  return u / static_cast<double>(data.n());
}

double gehan_smoothed_loss(const SurvivalDataset& data, const Vector& beta, double eps, Vector* gradient) {
  check_dims(data, beta);
  if (!(eps > 0.0)) throw InputError("gehan: smoothing width must be positive");
  PairDifferences pairs(data);
  const Vector a = pairs.dy - pairs.dx * beta;
  if (gradient != nullptr) {
    const Vector ds = 0.5 * (a.array() / (a.array().square() + eps * eps).sqrt() - 1.0);
    *gradient = -(pairs.dx.transpose() * ds);
  }
  return smoothed_value(a, eps);
}

GehanFit gehan_fit(const SurvivalDataset& data, const GehanOptions& options, const Vector* start) {
  data.validate();
  const Index p = data.p();
  if (data.events() <= p) throw InputError("gehan: needs more events than covariates");
  if (start != nullptr && start->size() != p) throw InputError("gehan: start vector has wrong length");

  PairDifferences pairs(data);
  double scale = standard_deviation(data.times);
  if (!(scale > 0.0)) scale = 1.0;

  Vector beta;
  if (start != nullptr) {
    beta = *start;
  } else {
    // least squares with intercept on the events as a starting point
    IndexSet ev;
    for (Index i = 0; i < data.n(); ++i)
      if (data.status(i) == 1) ev.push_back(i);
    Matrix x = select_rows(data.covariates, ev);
    Vector y = select_rows(data.times, ev);
    Matrix xc = x.rowwise() - x.colwise().mean();
    Vector yc = y.array() - y.mean();
    beta = xc.colPivHouseholderQr().solve(yc);
    if (!beta.allFinite()) beta = Vector::Zero(p);
  }

  std::vector<double> stages;
  for (double f = start != nullptr ? 1e-2 : 1.0; f > options.eps_factor * 1.0001; f *= 0.1) stages.push_back(f);
  stages.push_back(options.eps_factor);

  GehanFit fit;
  int iterations = 0;
  double last_step = 0.0;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const double eps = stages[s] * scale;
    const bool final_stage = s + 1 == stages.size();
    const double tol = final_stage ? options.tolerance : std::max(options.tolerance, 1e-3);
    Vector a = pairs.dy - pairs.dx * beta;
    double f = smoothed_value(a, eps);
    while (true) {
      if (iterations >= options.max_iterations)
        throw SolverError("gehan: no convergence after " + std::to_string(iterations) + " iterations", beta,
                          last_step);
      ++iterations;
      const Vector root = (a.array().square() + eps * eps).sqrt();
      const Vector ds = 0.5 * (a.array() / root.array() - 1.0);
      const Vector grad = -(pairs.dx.transpose() * ds);
      const Vector curv = (0.5 * eps * eps) / root.array().cube();
      const Matrix weighted = pairs.dx.array().colwise() * curv.array().sqrt();
      Matrix hess = weighted.transpose() * weighted;
      const double ridge = 1e-12 * std::max(hess.trace() / static_cast<double>(p), 1e-300);
      hess.diagonal().array() += ridge;
      const Vector step = -hess.ldlt().solve(grad);
      const double slope = grad.dot(step);
      if (!step.allFinite() || slope >= 0.0) break;

      double t = 1.0;
      Vector next_beta;
      Vector next_a;
      double next_f = f;
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls) {
        next_beta = beta + t * step;
        next_a = pairs.dy - pairs.dx * next_beta;
        next_f = smoothed_value(next_a, eps);
        if (next_f <= f + 1e-4 * t * slope) {
          accepted = true;
          break;
        }
        t *= 0.5;
      }
      if (!accepted) break;  // no further decrease available at this width
      last_step = (t * step).lpNorm<Eigen::Infinity>();
      beta = std::move(next_beta);
      a = std::move(next_a);
      f = next_f;
      if (last_step <= tol * (1.0 + beta.lpNorm<Eigen::Infinity>())) break;
    }
  }
  fit.beta = beta;
  fit.iterations = iterations;
  fit.loss = gehan_loss(data, beta);
  return fit;
}

}  // namespace survenet

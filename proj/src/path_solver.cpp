#include "survenet/path_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace survenet {

namespace {

enum class Event { End, Join, Drop };

Vector active_solve(const Matrix& gram, const IndexSet& active, const Vector& rhs) {
  const Index k = static_cast<Index>(active.size());
  Matrix g(k, k);
  for (Index a = 0; a < k; ++a)
    for (Index b = 0; b < k; ++b) g(a, b) = gram(active[a], active[b]);
  return g.ldlt().solve(rhs);
}

// Squared norm of column j after projecting out the active columns, relative
// to its own squared norm. Near zero means j is collinear with the active set.
double residual_fraction(const Matrix& gram, const IndexSet& active, Index j) {
  if (active.empty()) return 1.0;
  const Index k = static_cast<Index>(active.size());
  Vector g_aj(k);
  for (Index a = 0; a < k; ++a) g_aj(a) = gram(active[a], j);
  const Vector coef = active_solve(gram, active, g_aj);
  return (gram(j, j) - g_aj.dot(coef)) / gram(j, j);
}

}  // namespace

LassoPath lasso_path_gram(const Matrix& gram, const Vector& xty, Index rows,
                          const PathOptions& options) {
  const Index p = gram.rows();
  if (p < 1 || gram.cols() != p || xty.size() != p) throw InputError("invalid matrix: dimension mismatch");
  if (!gram.allFinite() || !xty.allFinite()) throw InputError("invalid matrix");
  if (options.lambda_min < 0.0) throw InputError("lambda_min must be nonnegative");

  LassoPath path;
  path.rows = rows;
  path.cols = p;

  const double diag_scale = std::max(gram.diagonal().maxCoeff(), 0.0);
  std::vector<char> usable(static_cast<std::size_t>(p)), in_active(static_cast<std::size_t>(p), 0);
  for (Index j = 0; j < p; ++j) usable[j] = gram(j, j) > 1e-13 * diag_scale && gram(j, j) > 0.0;

  Vector beta = Vector::Zero(p);
  Vector corr = xty;
  double lambda = 0.0;
  Index first = -1;
  for (Index j = 0; j < p; ++j) {
    if (usable[j] && std::abs(corr(j)) > lambda) {
      lambda = std::abs(corr(j));
      first = j;
    }
  }
  if (first < 0 || lambda <= 0.0) {
    path.breakpoints.push_back({std::max(lambda, 0.0), 0.0, {}, beta});
    return path;
  }
  const double lambda_max = lambda;
  const double lambda_floor = std::max(options.lambda_min, 1e-12 * std::max(1.0, lambda_max));
  const Index max_active = std::max<Index>(1, std::min(rows - 1, p));
  const int max_steps = options.max_steps > 0 ? options.max_steps : static_cast<int>(50 * p + 100);
  const double gamma_eps = 1e-14 * lambda_max;
  const double tie_tol = 1e-11 * lambda_max;

  IndexSet active{first};
  in_active[first] = 1;
  Vector sign = Vector::Zero(p);
  sign(first) = corr(first) > 0 ? 1.0 : -1.0;
  path.breakpoints.push_back({lambda, 0.0, active, beta});

  for (int step = 0; step < max_steps; ++step) {
    if (lambda <= lambda_floor) break;
    const Index k = static_cast<Index>(active.size());
    if (k >= max_active && max_active < p) break;

    Vector s_a(k);
    for (Index a = 0; a < k; ++a) s_a(a) = sign(active[a]);
    const Vector d_a = active_solve(gram, active, s_a);
    Vector dir = Vector::Zero(p);
    for (Index a = 0; a < k; ++a) dir(active[a]) = d_a(a);
    const Vector slope = gram * dir;  // d corr / d gamma = -slope

    double gamma = lambda - options.lambda_min;
    Event event = Event::End;
    Index who = -1;
    if (k < max_active) {
      for (Index j = 0; j < p; ++j) {
        if (!usable[j] || in_active[j]) continue;
        if (std::abs(corr(j)) >= lambda - tie_tol) {
          // Tied with the active set already. It enters at this knot only if
          // the direction with it included moves it away from zero; otherwise
          // it would leave again immediately.
          IndexSet trial = active;
          trial.push_back(j);
          Vector s_t(k + 1);
          s_t.head(k) = s_a;
          s_t(k) = corr(j) > 0 ? 1.0 : -1.0;
          const Vector d_t = active_solve(gram, trial, s_t);
          if (d_t(k) * s_t(k) > 0.0) {
            gamma = 0.0;
            event = Event::Join;
            who = j;
            break;
          }
        }
        const double a_j = slope(j);
        if (1.0 - a_j > 1e-12) {
          const double g = (lambda - corr(j)) / (1.0 - a_j);
          if (g > gamma_eps && g < gamma) { gamma = g; event = Event::Join; who = j; }
        }
        if (1.0 + a_j > 1e-12) {
          const double g = (lambda + corr(j)) / (1.0 + a_j);
          if (g > gamma_eps && g < gamma) { gamma = g; event = Event::Join; who = j; }
        }
      }
    }
    if (!(event == Event::Join && gamma == 0.0)) {
      for (Index j : active) {
        if (dir(j) * sign(j) >= 0.0) continue;
        // a coefficient already at zero leaves at once
        const double g = beta(j) * sign(j) <= 0.0 ? 0.0 : -beta(j) / dir(j);
        if (g < gamma) { gamma = g; event = Event::Drop; who = j; }
      }
    }

    lambda -= gamma;
    if (event == Event::End) lambda = std::max(options.lambda_min, 0.0);
    beta += gamma * dir;

    if (event == Event::Drop) {
      active.erase(std::find(active.begin(), active.end(), who));
      in_active[who] = 0;
      beta(who) = 0.0;
      sign(who) = 0.0;
    } else if (event == Event::Join) {
      const double c_j = xty(who) - gram.row(who).dot(beta);
      if (residual_fraction(gram, active, who) < 1e-10) {
        usable[who] = 0;  // collinear with the active set; never enters
      } else {
        active.push_back(who);
        in_active[who] = 1;
        sign(who) = c_j > 0 ? 1.0 : -1.0;
      }
    }

    // Re-solve the active coefficients exactly at the new knot so rounding
    // does not accumulate along the path.
    if (!active.empty()) {
      const Index ka = static_cast<Index>(active.size());
      Vector rhs(ka);
      for (Index a = 0; a < ka; ++a) rhs(a) = xty(active[a]) - lambda * sign(active[a]);
      const Vector b_a = active_solve(gram, active, rhs);
      beta.setZero();
      const double snap = 1e-12 * std::max(1.0, b_a.lpNorm<Eigen::Infinity>());
      for (Index a = 0; a < ka; ++a) {
        const Index j = active[a];
        // a freshly joined coefficient may come back as -1e-17 against its sign
        beta(j) = (b_a(a) * sign(j) < 0.0 && std::abs(b_a(a)) <= snap) ? 0.0 : b_a(a);
      }
      // a variable sits exactly at zero on the knot where it joins
      if (event == Event::Join && in_active[who]) beta(who) = 0.0;
    } else {
      beta.setZero();
    }
    corr = xty - gram * beta;

    PathBreakpoint knot{lambda, 0.0, active, beta};
    if (path.breakpoints.back().lambda1 - lambda > gamma_eps)
      path.breakpoints.push_back(std::move(knot));
    else
      path.breakpoints.back() = std::move(knot);
    if (event == Event::End) break;
  }

  const double l_end = path.terminus_l1();
  for (auto& bp : path.breakpoints) bp.t1_fraction = l_end > 0.0 ? std::min(1.0, bp.beta.lpNorm<1>() / l_end) : 0.0;
  path.breakpoints.back().t1_fraction = l_end > 0.0 ? 1.0 : 0.0;
  return path;
}

LassoPath lasso_path(const Matrix& x, const Vector& y, const PathOptions& options) {
  if (x.cols() < 1 || x.rows() != y.size()) throw InputError("invalid matrix: dimension mismatch");
  if (!x.allFinite() || !y.allFinite()) throw InputError("invalid matrix");
  const Matrix gram = x.transpose() * x;
  const Vector xty = x.transpose() * y;
  return lasso_path_gram(gram, xty, x.rows(), options);
}

Vector solve_at(const LassoPath& path, double t1) {
  if (!(t1 >= 0.0 && t1 <= 1.0)) throw InputError("t1 must lie in [0, 1]");
  const auto& bps = path.breakpoints;
  const double l_end = path.terminus_l1();
  if (t1 == 1.0) return bps.back().beta;
  if (t1 == 0.0 || l_end == 0.0) return Vector::Zero(path.cols);
  const double target = t1 * l_end;
  double prev_l1 = bps.front().beta.lpNorm<1>();
  for (std::size_t k = 1; k < bps.size(); ++k) {
    const double l1 = bps[k].beta.lpNorm<1>();
    if (l1 >= target) {
      const double span = l1 - prev_l1;
      const double frac = span > 0.0 ? std::clamp((target - prev_l1) / span, 0.0, 1.0) : 1.0;
      return bps[k - 1].beta + frac * (bps[k].beta - bps[k - 1].beta);
    }
    prev_l1 = l1;
  }
  return bps.back().beta;
}

Vector solve_at_lambda(const LassoPath& path, double lambda1) {
  if (!(lambda1 >= 0.0)) throw InputError("lambda1 must be nonnegative");
  const auto& bps = path.breakpoints;
  if (lambda1 >= bps.front().lambda1) return Vector::Zero(path.cols);
  for (std::size_t k = 1; k < bps.size(); ++k) {
    if (lambda1 >= bps[k].lambda1) {
      const double span = bps[k - 1].lambda1 - bps[k].lambda1;
      const double frac = (bps[k - 1].lambda1 - lambda1) / span;
      return bps[k - 1].beta + frac * (bps[k].beta - bps[k - 1].beta);
    }
  }
  return bps.back().beta;
}

double kkt_residual(const Matrix& x, const Vector& y, const Vector& beta, double lambda1) {
  const Vector corr = x.transpose() * (y - x * beta);
  double worst = 0.0;
  for (Index j = 0; j < beta.size(); ++j) {
    double r;
    if (beta(j) != 0.0)
      r = std::abs(corr(j) - lambda1 * (beta(j) > 0 ? 1.0 : -1.0));
    else
      r = std::max(0.0, std::abs(corr(j)) - lambda1);
    worst = std::max(worst, r);
  }
  return worst;
}

}  // namespace survenet

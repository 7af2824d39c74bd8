#include "survenet/constrained_qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace survenet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

// All constraints as l <= A z <= u: the inequality rows first, then one
// identity row per finite lower bound.
struct Stacked {
  Matrix a;
  Vector lower;
  Vector upper;
};

Stacked stack_constraints(const QPProblem& qp) {
  const Index n = qp.dim(), m = qp.ineq_matrix.rows();
  IndexSet bounded;
  for (Index j = 0; j < n; ++j)
    if (std::isfinite(qp.lower_bounds(j))) bounded.push_back(j);
  const Index rows = m + static_cast<Index>(bounded.size());
  Stacked s;
  s.a = Matrix::Zero(rows, n);
  s.lower = Vector::Constant(rows, -kInf);
  s.upper = Vector::Constant(rows, kInf);
  if (m > 0) {
    s.a.topRows(m) = qp.ineq_matrix;
    s.upper.head(m) = qp.ineq_rhs;
  }
  for (std::size_t k = 0; k < bounded.size(); ++k) {
    const Index r = m + static_cast<Index>(k);
    s.a(r, bounded[k]) = 1.0;
    s.lower(r) = qp.lower_bounds(bounded[k]);
  }
  return s;
}

double finite_inf_norm(const Vector& v) {
  double out = 0.0;
  for (Index i = 0; i < v.size(); ++i)
    if (std::isfinite(v(i))) out = std::max(out, std::abs(v(i)));
  return out;
}

// Residuals are relative to the magnitude of the terms they balance, so the
// same tolerance works for badly scaled designs.
double kkt_residual(const QPProblem& qp, const Stacked& s, const Vector& z, const Vector& y) {
  const Vector az = s.a * z;
  const Vector pz = qp.q_matrix * z;
  const Vector aty = s.a.transpose() * y;

  const double bound_scale = 1.0 + std::max(inf_norm(az), std::max(finite_inf_norm(s.lower), finite_inf_norm(s.upper)));
  double primal = 0.0;
  double sign = 0.0;
  double comp = 0.0;
  for (Index i = 0; i < az.size(); ++i) {
    primal = std::max(primal, std::max(az(i) - s.upper(i), s.lower(i) - az(i)));
    if (y(i) > 0.0) {
      if (std::isfinite(s.upper(i)))
        comp = std::max(comp, y(i) * std::abs(s.upper(i) - az(i)));
      else
        sign = std::max(sign, y(i));
    } else if (y(i) < 0.0) {
      if (std::isfinite(s.lower(i)))
        comp = std::max(comp, -y(i) * std::abs(az(i) - s.lower(i)));
      else
        sign = std::max(sign, -y(i));
    }
  }
  const double grad_scale = 1.0 + std::max({inf_norm(pz), inf_norm(qp.linear_term), inf_norm(aty)});
  const double stationarity = inf_norm(pz + qp.linear_term + aty) / grad_scale;
  primal = std::max(primal, 0.0) / bound_scale;
  sign /= grad_scale;
  comp /= grad_scale * bound_scale;
  return std::max({primal, stationarity, sign, comp});
}

// Ruiz equilibration of [P A^T; A 0] followed by cost scaling:
// P_hat = c D P D, q_hat = c D q, A_hat = E A D.
struct Scaling {
  Vector d;
  Vector e;
  double c = 1.0;
};

Scaling equilibrate(const Matrix& p, const Vector& q, const Matrix& a, int iterations) {
  const Index n = p.rows(), m = a.rows();
  Scaling sc{Vector::Ones(n), Vector::Ones(m), 1.0};
  Matrix ps = p;
  Matrix as = a;
  Vector qs = q;
  auto safe = [](double v) { return v < 1e-4 ? 1.0 : 1.0 / std::sqrt(std::min(v, 1e4)); };
  for (int it = 0; it < iterations; ++it) {
    Vector dd(n), de(m);
    for (Index j = 0; j < n; ++j) {
      double v = ps.col(j).lpNorm<Eigen::Infinity>();
      if (m > 0) v = std::max(v, as.col(j).lpNorm<Eigen::Infinity>());
      dd(j) = safe(v);
    }
    for (Index i = 0; i < m; ++i) de(i) = safe(as.row(i).lpNorm<Eigen::Infinity>());
    ps = dd.asDiagonal() * ps * dd.asDiagonal();
    as = de.asDiagonal() * as * dd.asDiagonal();
    qs = dd.cwiseProduct(qs);
    sc.d = sc.d.cwiseProduct(dd);
    sc.e = sc.e.cwiseProduct(de);

    double mean_col = 0.0;
    for (Index j = 0; j < n; ++j) mean_col += ps.col(j).lpNorm<Eigen::Infinity>();
    mean_col /= static_cast<double>(std::max<Index>(n, 1));
    const double cost = std::max(mean_col, inf_norm(qs));
    const double gamma = cost < 1e-4 ? 1.0 : 1.0 / std::min(cost, 1e4);
    ps *= gamma;
    qs *= gamma;
    sc.c *= gamma;
  }
  return sc;
}

struct PolishResult {
  Vector z;
  Vector y;
  double residual = kInf;
};

// Solves the equality-constrained problem on the active set guessed from the
// ADMM iterate, with a small regularization removed by iterative refinement.
PolishResult polish(const QPProblem& qp, const Stacked& s, const Vector& z_hat, const Vector& y_hat,
                    const Vector& l_hat, const Vector& u_hat) {
  const Index n = qp.dim(), m = s.a.rows();
  IndexSet active;
  std::vector<bool> at_upper;
  for (Index i = 0; i < m; ++i) {
    if (z_hat(i) - l_hat(i) < -y_hat(i)) {
      active.push_back(i);
      at_upper.push_back(false);
    } else if (u_hat(i) - z_hat(i) < y_hat(i)) {
      active.push_back(i);
      at_upper.push_back(true);
    }
  }
  const Index k = static_cast<Index>(active.size());
  const double delta = 1e-9 * std::max(1.0, qp.q_matrix.diagonal().cwiseAbs().maxCoeff());

  Matrix kkt = Matrix::Zero(n + k, n + k);
  Vector rhs(n + k);
  kkt.topLeftCorner(n, n) = qp.q_matrix;
  rhs.head(n) = -qp.linear_term;
  for (Index r = 0; r < k; ++r) {
    const Index i = active[static_cast<std::size_t>(r)];
    kkt.block(n + r, 0, 1, n) = s.a.row(i);
    kkt.block(0, n + r, n, 1) = s.a.row(i).transpose();
    rhs(n + r) = at_upper[static_cast<std::size_t>(r)] ? s.upper(i) : s.lower(i);
  }
  Matrix regularized = kkt;
  regularized.topLeftCorner(n, n).diagonal().array() += delta;
  regularized.bottomRightCorner(k, k).diagonal().array() -= delta;
  const Eigen::LDLT<Matrix> factor(regularized);

  Vector sol = factor.solve(rhs);
  for (int it = 0; it < 10 && sol.allFinite(); ++it) {
    const Vector res = rhs - kkt * sol;
    if (inf_norm(res) <= 1e-15 * (1.0 + inf_norm(rhs))) break;
    sol += factor.solve(res);
  }
  PolishResult out;
  if (!sol.allFinite()) return out;
  out.z = sol.head(n);
  out.y = Vector::Zero(m);
  for (Index r = 0; r < k; ++r) out.y(active[static_cast<std::size_t>(r)]) = sol(n + r);
  out.residual = kkt_residual(qp, s, out.z, out.y);
  return out;
}

}  // namespace

double QPProblem::objective(const Vector& z) const {
  return 0.5 * z.dot(q_matrix * z) + linear_term.dot(z) + constant;
}

double QPProblem::primal_violation(const Vector& z) const {
  double v = 0.0;
  if (ineq_matrix.rows() > 0) v = std::max(v, (ineq_matrix * z - ineq_rhs).maxCoeff());
  for (Index j = 0; j < z.size(); ++j)
    if (std::isfinite(lower_bounds(j))) v = std::max(v, lower_bounds(j) - z(j));
  return std::max(v, 0.0);
}

void QPProblem::validate() const {
  const Index n = q_matrix.rows();
  if (q_matrix.cols() != n) throw InputError("qp: objective matrix must be square");
  if (linear_term.size() != n || lower_bounds.size() != n) throw InputError("qp: vector length mismatch");
  if (ineq_matrix.rows() != ineq_rhs.size() || (ineq_matrix.rows() > 0 && ineq_matrix.cols() != n))
    throw InputError("qp: constraint dimension mismatch");
  if (!q_matrix.allFinite() || !linear_term.allFinite() || !ineq_matrix.allFinite() || !ineq_rhs.allFinite())
    throw InputError("qp: non-finite problem data");
  if ((q_matrix - q_matrix.transpose()).lpNorm<Eigen::Infinity>() >
      1e-10 * (1.0 + q_matrix.lpNorm<Eigen::Infinity>()))
    throw InputError("qp: objective matrix is not symmetric");
  for (Index j = 0; j < n; ++j)
    if (std::isnan(lower_bounds(j)) || lower_bounds(j) == kInf) throw InputError("qp: invalid lower bound");
}

double qp_kkt_residual(const QPProblem& problem, const Vector& z, const Vector& dual) {
  const Stacked s = stack_constraints(problem);
  if (z.size() != problem.dim() || dual.size() != s.a.rows()) throw InputError("qp: iterate length mismatch");
  return kkt_residual(problem, s, z, dual);
}

QPSolution solve_qp(const QPProblem& problem, const QPSettings& settings) {
  problem.validate();
  if (!(settings.tol > 0.0)) throw InputError("qp: tolerance must be positive");
  const Stacked s = stack_constraints(problem);
  const Index n = problem.dim(), m = s.a.rows();

  const Scaling sc = equilibrate(problem.q_matrix, problem.linear_term, s.a, settings.scaling_iterations);
  const Matrix p_hat = sc.c * (sc.d.asDiagonal() * problem.q_matrix * sc.d.asDiagonal());
  const Vector q_hat = sc.c * sc.d.cwiseProduct(problem.linear_term);
  const Matrix a_hat = sc.e.asDiagonal() * s.a * sc.d.asDiagonal();
  const Vector l_hat = sc.e.cwiseProduct(s.lower);
  const Vector u_hat = sc.e.cwiseProduct(s.upper);

  auto unscale_z = [&](const Vector& x) -> Vector { return sc.d.cwiseProduct(x); };
  auto unscale_y = [&](const Vector& y) -> Vector { return sc.e.cwiseProduct(y) / sc.c; };

  double rho = settings.rho;
  const double sigma = settings.sigma;
  const double alpha = settings.relaxation;
  auto factorize = [&](double r) {
    Matrix k = p_hat + r * a_hat.transpose() * a_hat;
    k.diagonal().array() += sigma;
    return Eigen::LLT<Matrix>(k);
  };
  Eigen::LLT<Matrix> factor = factorize(rho);

  Vector x = Vector::Zero(n);
  Vector z = Vector::Zero(m).cwiseMax(l_hat).cwiseMin(u_hat);
  Vector y = Vector::Zero(m);

  QPSolution best;
  best.z = Vector::Zero(n);
  best.dual = Vector::Zero(m);
  best.kkt_residual = kInf;
  double polish_threshold = 1e-3;

  auto finish = [&](QPSolution sol, int iter) {
    sol.iterations = iter;
    sol.objective = problem.objective(sol.z);
    sol.primal_violation = problem.primal_violation(sol.z);
    return sol;
  };

  // an unconstrained problem is a single linear solve
  if (m == 0 && settings.polish) {
    PolishResult pr = polish(problem, s, Vector(), Vector(), Vector(), Vector());
    if (pr.residual <= settings.tol) {
      QPSolution sol;
      sol.z = pr.z;
      sol.dual = pr.y;
      sol.kkt_residual = pr.residual;
      sol.polished = true;
      return finish(sol, 0);
    }
  }

  for (int iter = 1; iter <= settings.max_iterations; ++iter) {
    const Vector rhs = sigma * x - q_hat + a_hat.transpose() * (rho * z - y);
    const Vector x_tilde = factor.solve(rhs);
    const Vector z_tilde = a_hat * x_tilde;
    x = alpha * x_tilde + (1.0 - alpha) * x;
    const Vector z_relaxed = alpha * z_tilde + (1.0 - alpha) * z;
    z = (z_relaxed + y / rho).cwiseMax(l_hat).cwiseMin(u_hat);
    y += rho * (z_relaxed - z);

    if (iter % settings.check_every != 0 && iter != settings.max_iterations) continue;

    const Vector ax = a_hat * x;
    const Vector px = p_hat * x;
    const Vector aty = a_hat.transpose() * y;
    const double prim_scaled = inf_norm(sc.e.cwiseInverse().cwiseProduct(ax - z));
    const double prim_ref = std::max(inf_norm(sc.e.cwiseInverse().cwiseProduct(ax)),
                                     inf_norm(sc.e.cwiseInverse().cwiseProduct(z)));
    const Vector dual_vec = sc.d.cwiseInverse().cwiseProduct(px + q_hat + aty) / sc.c;
    const double dual_ref = std::max({inf_norm(sc.d.cwiseInverse().cwiseProduct(px)),
                                      inf_norm(sc.d.cwiseInverse().cwiseProduct(q_hat)),
                                      inf_norm(sc.d.cwiseInverse().cwiseProduct(aty))}) /
                            sc.c;
    const double prim_rel = prim_scaled / (1.0 + prim_ref);
    const double dual_rel = inf_norm(dual_vec) / (1.0 + dual_ref);

    const Vector z_orig = unscale_z(x);
    const Vector y_orig = unscale_y(y);
    const double res = kkt_residual(problem, s, z_orig, y_orig);
    if (res < best.kkt_residual) {
      best.z = z_orig;
      best.dual = y_orig;
      best.kkt_residual = res;
      best.polished = false;
    }
    if (res <= settings.tol) return finish(best, iter);

    if (settings.polish && std::max(prim_rel, dual_rel) <= polish_threshold) {
      PolishResult pr = polish(problem, s, z, y, l_hat, u_hat);
      if (pr.residual < best.kkt_residual) {
        best.z = pr.z;
        best.dual = pr.y;
        best.kkt_residual = pr.residual;
        best.polished = true;
      }
      if (pr.residual <= settings.tol) return finish(best, iter);
      polish_threshold = std::max(0.1 * polish_threshold, 1e-12);
    }

    if (iter % (5 * settings.check_every) == 0 && prim_rel > 0.0 && dual_rel > 0.0) {
      const double ratio = std::sqrt(prim_rel / dual_rel);
      const double next = std::clamp(rho * ratio, 1e-6, 1e6);
      if (ratio > 5.0 || ratio < 0.2) {
        rho = next;
        factor = factorize(rho);
      }
    }
  }
  throw SolverError("qp: no convergence after " + std::to_string(settings.max_iterations) +
                        " iterations (kkt residual " + std::to_string(best.kkt_residual) + ")",
                    best.z, best.kkt_residual);
}

QPProblem build_censored_qp(const Matrix& design, const Vector& response, const Vector& ridge,
                            const Vector& budget_weights, double t1, const Matrix& constraint_x,
                            const Vector& constraint_y, double lambda0) {
  const Index p = design.cols(), mc = constraint_x.rows();
  if (design.rows() != response.size()) throw InputError("qp: design and response length mismatch");
  if (ridge.size() != p || budget_weights.size() != p) throw InputError("qp: weight length mismatch");
  if (constraint_y.size() != mc || (mc > 0 && constraint_x.cols() != p))
    throw InputError("qp: censoring constraint dimension mismatch");
  if (!(t1 >= 0.0) || !std::isfinite(t1)) throw InputError("t1 must be nonnegative");
  if (!(lambda0 >= 0.0) || !std::isfinite(lambda0)) throw InputError("lambda0 must be nonnegative");
  if (!(ridge.minCoeff() >= 0.0)) throw InputError("qp: ridge must be nonnegative");

  const Index dim = 2 * p + mc;
  QPProblem qp;
  qp.num_beta = p;
  qp.num_slack = mc;
  Matrix gram = design.transpose() * design;
  gram.diagonal() += ridge;
  const Matrix cross = design.transpose() * design;
  qp.q_matrix = Matrix::Zero(dim, dim);
  qp.q_matrix.block(0, 0, p, p) = gram;
  qp.q_matrix.block(p, p, p, p) = gram;
  qp.q_matrix.block(0, p, p, p) = -cross;
  qp.q_matrix.block(p, 0, p, p) = -cross;
  qp.q_matrix.bottomRightCorner(mc, mc).diagonal().setConstant(2.0 * lambda0);

  const Vector xty = design.transpose() * response;
  qp.linear_term = Vector::Zero(dim);
  qp.linear_term.head(p) = -xty;
  qp.linear_term.segment(p, p) = xty;
  qp.constant = 0.5 * response.squaredNorm();

  qp.ineq_matrix = Matrix::Zero(1 + mc, dim);
  qp.ineq_rhs = Vector::Zero(1 + mc);
  qp.ineq_matrix.block(0, 0, 1, p) = budget_weights.transpose();
  qp.ineq_matrix.block(0, p, 1, p) = budget_weights.transpose();
  qp.ineq_rhs(0) = t1;
  if (mc > 0) {
    qp.ineq_matrix.block(1, 0, mc, p) = -constraint_x;
    qp.ineq_matrix.block(1, p, mc, p) = constraint_x;
    qp.ineq_matrix.block(1, 2 * p, mc, mc).diagonal().setConstant(-1.0);
    qp.ineq_rhs.tail(mc) = -constraint_y;
  }
  qp.lower_bounds = Vector::Zero(dim);
  return qp;
}

namespace {

void check_weights(const StandardizedData& std_data, const AdaptiveWeights& w, double lambda2) {
  if (w.w.size() != std_data.p()) throw InputError("penalty weight length does not match covariates");
  if (!w.w.allFinite() || w.w.size() == 0 || w.w.minCoeff() <= 0.0) throw InputError("penalty weights must be positive");
  if (!(lambda2 >= 0.0) || !std::isfinite(lambda2)) throw InputError("lambda2 must be nonnegative");
}

// Column scale s_j such that solver coordinates are b_j = naive_j / s_j.
Vector solver_scale(Method method, const Vector& w, double lambda2) {
  if (method == Method::AEnetCC) return w.cwiseInverse();
  return w.cwiseInverse() / std::sqrt(1.0 + lambda2);
}

QPProblem build_for(Method method, const StandardizedData& std_data, const AdaptiveWeights& w, double t1,
                    double lambda2, double lambda0) {
  check_weights(std_data, w, lambda2);
  const Index p = std_data.p();
  const Vector scale = solver_scale(method, w.w, lambda2);
  const Matrix design = std_data.x_uncensored() * scale.asDiagonal();
  const Matrix cons = std_data.x_censored * scale.asDiagonal();
  Vector ridge;
  if (method == Method::AEnetCC)
    ridge = lambda2 * w.w.cwiseInverse().cwiseAbs2();
  else
    ridge = Vector::Constant(p, lambda2 / (1.0 + lambda2));
  return build_censored_qp(design, std_data.y_uncensored(), ridge, Vector::Ones(p), t1, cons,
                           std_data.y_censored, lambda0);
}

FitResult fit_cc(Method method, const StandardizedData& std_data, const AdaptiveWeights& w, double t1,
                 double lambda2, double lambda0, double varsigma, const QPSettings& settings) {
  const QPProblem qp = build_for(method, std_data, w, t1, lambda2, lambda0);
  const QPSolution sol = solve_qp(qp, settings);
  const Index p = qp.num_beta, mc = qp.num_slack;

  const Vector b = sol.z.head(p) - sol.z.segment(p, p);
  const Vector scale = solver_scale(method, w.w, lambda2);
  const Vector naive = b.cwiseProduct(scale);
  // slack at its exact optimum for this beta
  Vector xi = Vector::Zero(mc);
  if (mc > 0) xi = (std_data.y_censored - std_data.x_censored * naive).cwiseMax(0.0);

  FitResult fit;
  fit.method = method;
  fit.lambda2 = lambda2;
  fit.t1 = t1;
  fit.lambda0 = lambda0;
  fit.penalty_weights = w.w;
  fit.beta_naive = naive;
  if (method == Method::AEnetCC) {
    fit.output_scale = 1.0 + lambda2;
    fit.beta_starred = naive;
  } else {
    fit.output_scale = std::sqrt(1.0 + lambda2);
    fit.beta_starred = fit.output_scale * naive;
  }
  fit.beta = fit.output_scale * fit.beta_starred;
  fit.intercept = recover_intercept(fit.beta, std_data);
  fit.selected = thresholded_support(fit.beta, varsigma);
  fit.xi = xi;
  double violation = 0.0;
  if (mc > 0) violation = std::max(0.0, (std_data.y_censored - std_data.x_censored * naive - xi).maxCoeff());
  fit.constraint_violation = violation;
  fit.solver_residual = sol.kkt_residual;
  return fit;
}

}  // namespace

QPProblem build_aenetcc_qp(const StandardizedData& std_data, const AdaptiveWeights& w_hat, double t1,
                           double lambda2, double lambda0) {
  return build_for(Method::AEnetCC, std_data, w_hat, t1, lambda2, lambda0);
}

QPProblem build_wenetcc_qp(const StandardizedData& std_data, const AdaptiveWeights& w, double t1,
                           double lambda2, double lambda0) {
  return build_for(Method::WEnetCC, std_data, w, t1, lambda2, lambda0);
}

FitResult aenetcc_fit(const StandardizedData& std_data, const AdaptiveWeights& w_hat, double t1,
                      double lambda2, double lambda0, double varsigma, const QPSettings& settings) {
  return fit_cc(Method::AEnetCC, std_data, w_hat, t1, lambda2, lambda0, varsigma, settings);
}

FitResult wenetcc_fit(const StandardizedData& std_data, const AdaptiveWeights& w, double t1, double lambda2,
                      double lambda0, double varsigma, const QPSettings& settings) {
  return fit_cc(Method::WEnetCC, std_data, w, t1, lambda2, lambda0, varsigma, settings);
}

}  // namespace survenet

#pragma once

#include "survenet/common.hpp"
#include "survenet/enet_solvers.hpp"
#include "survenet/survival_core.hpp"

namespace survenet {

/// min 1/2 z^T Q z + c^T z + constant  s.t.  A z <= b,  z >= lower.
///
/// Lower bounds may be -infinity. For the censoring-constrained problems the
/// decision vector is z = (beta+, beta-, xi) with `num_beta` entries in each
/// coefficient block and `num_slack` slacks; row 0 of A is the l1 budget and
/// the remaining rows are the censoring constraints.
struct QPProblem {
  Matrix q_matrix;
  Vector linear_term;
  double constant = 0.0;
  Matrix ineq_matrix;
  Vector ineq_rhs;
  Vector lower_bounds;
  Index num_beta = 0;
  Index num_slack = 0;

  Index dim() const { return q_matrix.rows(); }
  double objective(const Vector& z) const;
  /// max over rows of (A z - b)_+ and (lower - z)_+
  double primal_violation(const Vector& z) const;
  void validate() const;
};

struct QPSettings {
  double tol = 1e-8;
  int max_iterations = 200000;
  double rho = 0.1;
  double sigma = 1e-6;
  double relaxation = 1.6;
  int check_every = 25;
  int scaling_iterations = 15;
  bool polish = true;
};

struct QPSolution {
  Vector z;
  Vector dual;  // multipliers for A rows followed by finite lower bounds
  double objective = 0.0;
  double kkt_residual = 0.0;  // max of primal, stationarity, sign and complementarity residuals
  double primal_violation = 0.0;
  int iterations = 0;
  bool polished = false;
};

/// ADMM with Ruiz diagonal preconditioning and active-set polishing.
/// Deterministic. Throws SolverError carrying the best iterate if the
/// iteration cap is reached before the KKT residual drops to `tol`.
QPSolution solve_qp(const QPProblem& problem, const QPSettings& settings = {});

/// KKT residual of (z, dual) for `problem`, in the same sense as
/// QPSolution::kkt_residual.
double qp_kkt_residual(const QPProblem& problem, const Vector& z, const Vector& dual);

/// Generic censoring-constrained problem in solver coordinates b:
///   1/2 ||y - D(b+ - b-)||^2 + 1/2 sum r_j (b+_j^2 + b-_j^2) + lambda0 xi^T xi
///   s.t. sum g_j (b+_j + b-_j) <= t1,  y_c <= C (b+ - b-) + xi,  b+, b-, xi >= 0.
QPProblem build_censored_qp(const Matrix& design, const Vector& response, const Vector& ridge,
                            const Vector& budget_weights, double t1, const Matrix& constraint_x,
                            const Vector& constraint_y, double lambda0);

/// AEnetCC problem in the scaled coordinates b = w_hat * beta_naive: design
/// X_u / w_hat, ridge lambda2 / w_hat^2, unit budget, constraint rows
/// X_cens / w_hat.
QPProblem build_aenetcc_qp(const StandardizedData& std_data, const AdaptiveWeights& w_hat, double t1,
                           double lambda2, double lambda0);

/// WEnetCC problem in the starred-and-scaled coordinates
/// b = sqrt(1+lambda2) w beta_naive: design X_u / (sqrt(1+lambda2) w),
/// ridge lambda2 / (1+lambda2), unit budget, constraint rows scaled like X_u.
QPProblem build_wenetcc_qp(const StandardizedData& std_data, const AdaptiveWeights& w, double t1,
                           double lambda2, double lambda0);

/// Build, solve and map back: beta = (1+lambda2) * b / w_hat.
FitResult aenetcc_fit(const StandardizedData& std_data, const AdaptiveWeights& w_hat, double t1,
                      double lambda2, double lambda0, double varsigma = kDefaultVarsigma,
                      const QPSettings& settings = {});

/// Build, solve and map back: beta = sqrt(1+lambda2) * (b / w).
FitResult wenetcc_fit(const StandardizedData& std_data, const AdaptiveWeights& w, double t1, double lambda2,
                      double lambda0, double varsigma = kDefaultVarsigma, const QPSettings& settings = {});

}  // namespace survenet

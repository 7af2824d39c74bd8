#pragma once

#include <vector>

#include "survenet/common.hpp"

namespace survenet {

/// One knot of a lasso solution path. `active` lists the variables that are
/// in the active set for the segment starting at this knot.
struct PathBreakpoint {
  double lambda1 = 0.0;
  double t1_fraction = 0.0;  // ||beta||_1 / ||beta_end||_1
  IndexSet active;
  Vector beta;
};

/// Piecewise-linear solution path of argmin 1/2 ||y - X b||^2 + lambda ||b||_1.
struct LassoPath {
  std::vector<PathBreakpoint> breakpoints;
  Index rows = 0;
  Index cols = 0;

  const Vector& terminus() const { return breakpoints.back().beta; }
  double terminus_l1() const { return breakpoints.back().beta.lpNorm<1>(); }
  double lambda_max() const { return breakpoints.front().lambda1; }
};

struct PathOptions {
  /// Stop once lambda reaches this value (the final knot sits exactly on it).
  double lambda_min = 0.0;
  /// Hard cap on homotopy steps; 0 means 50 * cols + 100.
  int max_steps = 0;
};

/// Lasso-modified least-angle homotopy from lambda_max = ||X^T y||_inf down to
/// the least-squares end. Variables may leave the active set, zero-norm and
/// collinear columns never enter, and ties go to the lowest column index.
LassoPath lasso_path(const Matrix& x, const Vector& y, const PathOptions& options = {});

/// Same path computed from the Gram matrix X^T X and correlations X^T y.
LassoPath lasso_path_gram(const Matrix& gram, const Vector& xty, Index rows,
                          const PathOptions& options = {});

/// Coefficients whose l1 norm equals t1 * ||beta_end||_1, interpolated on the
/// path. t1 must lie in [0, 1].
Vector solve_at(const LassoPath& path, double t1);

/// Coefficients at penalty level lambda1 (>= 0), interpolated on the path.
/// Values below the final knot return the terminus.
Vector solve_at_lambda(const LassoPath& path, double lambda1);

/// max_j of |x_j^T r - lambda sign(b_j)| over nonzero b_j and
/// max(0, |x_j^T r| - lambda) over zero b_j, with r = y - X b.
double kkt_residual(const Matrix& x, const Vector& y, const Vector& beta, double lambda1);

}  // namespace survenet

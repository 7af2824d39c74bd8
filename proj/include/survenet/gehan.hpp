#pragma once

#include "survenet/common.hpp"
#include "survenet/survival_core.hpp"

namespace survenet {

/// L_G(b) = sum_i sum_k delta_i (e_i - e_k)^-, e_i = Y_i - X_i^T b,
/// a^- = |a| 1{a < 0}. Convex and piecewise linear in b.
double gehan_loss(const SurvivalDataset& data, const Vector& beta);

/// U_G(b) = n^{-1} sum_i sum_k delta_i (X_i - X_k) 1{e_i <= e_k}.
Vector gehan_estimating_function(const SurvivalDataset& data, const Vector& beta);

/// Smoothed loss with a^- replaced by (sqrt(a^2 + eps^2) - a) / 2, and its
/// gradient when `gradient` is non-null.
double gehan_smoothed_loss(const SurvivalDataset& data, const Vector& beta, double eps,
                           Vector* gradient = nullptr);

struct GehanOptions {
  double eps_factor = 1e-4;   // final smoothing width, relative to sd(Y)
  double tolerance = 1e-6;    // Newton step size, relative to 1 + ||b||_inf
  int max_iterations = 5000;  // total Newton steps over all smoothing stages
};

struct GehanFit {
  Vector beta;
  int iterations = 0;
  double loss = 0.0;  // unsmoothed Gehan loss at beta
};

/// Minimises the Gehan loss through a continuation of smoothed surrogates,
/// each solved by damped Newton, warm-started when `start` is given. Needs
/// more events than covariates. Throws SolverError carrying the best iterate
/// if the iteration cap is hit.
GehanFit gehan_fit(const SurvivalDataset& data, const GehanOptions& options = {},
                   const Vector* start = nullptr);

}  // namespace survenet

#pragma once

#include "l20mc/common.hpp"
#include "l20mc/factors.hpp"

namespace l20mc {

// Keep column i of G iff ||G_i|| > tau, else set it to exact zero. Ties at
// the boundary resolve to zero.
Mat hard_threshold_columns(const Mat& g, double tau);

// Exact minimizer of
//   <grad, U> + gamma/2 ||U - anchor||_F^2 + mu/2 ||U||_F^2 + lambda ||U||_{2,0}:
// forms G = (gamma * anchor - grad) / (mu + gamma) and keeps columns with
// ||G_i|| > sqrt(2 lambda / (mu + gamma)). lambda = 0 returns G itself.
Mat prox_l20_step(const Mat& grad, const Mat& anchor, double gamma, const RegWeights& w);

// Exact minimizer of 1/2 ||G - U Lam||_F^2 + lambda ||U||_{2,0} for a
// positive diagonal Lam (given as a vector):
//   U_i = G_i / Lam_i if ||G_i|| > sqrt(2 lambda), else 0.
Mat scaled_hard_threshold(const Mat& g, const Vec& lam, double lambda);

// Unique minimizer of the smooth subproblem (lambda = 0):
//   (gamma * anchor - grad) / (mu + gamma).
Mat ridge_step(const Mat& grad, const Mat& anchor, double gamma, double mu);

// Test oracle: enumerate every zero/nonzero column pattern, solve each
// restricted quadratic in closed form, return a global minimizer of
//   1/2 ||G - U Lam||_F^2 + lambda ||U||_{2,0}.
// Limited to <= 12 columns.
Mat brute_force_prox(const Mat& g, const Vec& lam, double lambda);

// Objective value 1/2 ||G - U Lam||_F^2 + lambda ||U||_{2,0}, shared by the
// exactness tests.
double scaled_prox_objective(const Mat& g, const Vec& lam, double lambda, const Mat& u);

}  // namespace l20mc

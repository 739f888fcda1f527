#include "l20mc/prox.hpp"

#include <cmath>

namespace l20mc {

Mat hard_threshold_columns(const Mat& g, double tau) {
  if (!(tau > 0.0)) throw validation_error("hard_threshold_columns: tau must be positive");
  Mat out = Mat::Zero(g.rows(), g.cols());
  for (Index j = 0; j < g.cols(); ++j) {
    if (g.col(j).norm() > tau) out.col(j) = g.col(j);
  }
  return out;
}

Mat prox_l20_step(const Mat& grad, const Mat& anchor, double gamma, const RegWeights& w) {
  if (!(gamma > 0.0)) throw validation_error("prox_l20_step: gamma must be positive");
  w.validate();
  if (grad.rows() != anchor.rows() || grad.cols() != anchor.cols())
    throw dimension_error("prox_l20_step: grad and anchor shapes differ");
  Mat g = (gamma * anchor - grad) / (w.mu + gamma);
  if (w.lambda == 0.0) return g;
  const double tau = std::sqrt(2.0 * w.lambda / (w.mu + gamma));
  return hard_threshold_columns(g, tau);
}

Mat scaled_hard_threshold(const Mat& g, const Vec& lam, double lambda) {
  if (lam.size() != g.cols()) throw dimension_error("scaled_hard_threshold: diagonal size mismatch");
  if ((lam.array() <= 0.0).any()) throw validation_error("scaled_hard_threshold: diagonal must be positive");
  if (lambda < 0.0) throw validation_error("scaled_hard_threshold: lambda must be nonnegative");
  Mat out = Mat::Zero(g.rows(), g.cols());
  const double thresh = std::sqrt(2.0 * lambda);
  for (Index j = 0; j < g.cols(); ++j) {
    const double nrm = g.col(j).norm();
    if (lambda == 0.0 ? true : nrm > thresh) out.col(j) = g.col(j) / lam(j);
  }
  return out;
}

Mat ridge_step(const Mat& grad, const Mat& anchor, double gamma, double mu) {
  if (!(gamma > 0.0) || !(mu > 0.0)) throw validation_error("ridge_step: gamma and mu must be positive");
  if (grad.rows() != anchor.rows() || grad.cols() != anchor.cols())
    throw dimension_error("ridge_step: grad and anchor shapes differ");
  return (gamma * anchor - grad) / (mu + gamma);
}

double scaled_prox_objective(const Mat& g, const Vec& lam, double lambda, const Mat& u) {
  double val = 0.5 * (g - u * lam.asDiagonal()).squaredNorm();
  val += lambda * static_cast<double>(count_nonzero_columns(u));
  return val;
}

Mat brute_force_prox(const Mat& g, const Vec& lam, double lambda) {
  const Index r = g.cols();
  if (r > 12) throw validation_error("brute_force_prox: too many columns");
  if (lam.size() != r) throw dimension_error("brute_force_prox: diagonal size mismatch");
  if ((lam.array() <= 0.0).any()) throw validation_error("brute_force_prox: diagonal must be positive");
  Mat best = Mat::Zero(g.rows(), r);
  double best_val = scaled_prox_objective(g, lam, lambda, best);
  Mat cand(g.rows(), r);
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << r); ++mask) {
    cand.setZero();
    for (Index j = 0; j < r; ++j) {
      if (mask & (std::uint64_t{1} << j)) cand.col(j) = g.col(j) / lam(j);
    }
    const double val = scaled_prox_objective(g, lam, lambda, cand);
    if (val < best_val) {
      best_val = val;
      best = cand;
    }
  }
  return best;
}

}  // namespace l20mc

#include "l20mc/metrics.hpp"

#include <cmath>

namespace l20mc {

double relative_error(const FactorPair& out, const GroundTruth& truth) {
  out.require_consistent();
  if (out.u.rows() != truth.m_left.rows() || out.v.rows() != truth.m_right.rows())
    throw dimension_error("relative_error: dimensions do not match the ground truth");
  const double truth_sq =
      ((truth.m_left.transpose() * truth.m_left).cwiseProduct(truth.m_right.transpose() * truth.m_right))
          .sum();
  if (!(truth_sq > 0.0)) throw validation_error("relative_error: ground truth has zero norm");
  const double diff_sq = product_diff_fro_sq(out.u, out.v, truth.m_left, truth.m_right);
  return std::sqrt(diff_sq) / std::sqrt(truth_sq);
}

double nmae(const FactorPair& out, std::span<const Entry> heldout, double r_min, double r_max) {
  out.require_consistent();
  if (heldout.empty()) throw validation_error("nmae: empty held-out set");
  if (!(r_max > r_min)) throw validation_error("nmae: rating range is degenerate");
  double acc = 0.0;
  for (const Entry& e : heldout) {
    const double pred = out.u.row(e.row).dot(out.v.row(e.col));
    acc += std::abs(pred - e.value);
  }
  return acc / (static_cast<double>(heldout.size()) * (r_max - r_min));
}

}  // namespace l20mc

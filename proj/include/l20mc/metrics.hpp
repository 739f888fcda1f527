#pragma once

#include <span>

#include "l20mc/common.hpp"
#include "l20mc/datagen.hpp"
#include "l20mc/factors.hpp"

namespace l20mc {

// ||U V^T - M*||_F / ||M*||_F through Gram-product traces (no dense n x m
// matrix is formed).
double relative_error(const FactorPair& out, const GroundTruth& truth);

// Range-normalized mean absolute prediction error over held-out entries:
//   sum |(U V^T)_ij - M_ij| / (|heldout| * (r_max - r_min)).
double nmae(const FactorPair& out, std::span<const Entry> heldout, double r_min, double r_max);

}  // namespace l20mc

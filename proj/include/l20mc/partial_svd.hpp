#pragma once

#include "l20mc/common.hpp"
#include "l20mc/observations.hpp"

namespace l20mc {

struct PartialSvd {
  Mat left;    // n x k, orthonormal columns
  Mat right;   // m x k, orthonormal columns
  Vec sigma;   // k, nonincreasing, nonnegative
};

// Top-k singular triplets of M_Omega (embedded in n x m) by randomized
// subspace iteration on the sparse operator. Deterministic given the seed.
// k is capped at min(n, m); if the matrix has fewer than k numerically
// nonzero singular values the trailing ones are zero (with zero vectors
// replaced by an orthonormal completion of the sampled range).
PartialSvd partial_svd(const ObservationSet& obs, Index k, std::uint64_t seed,
                       int power_iters = 2, Index oversample = 10);

}  // namespace l20mc

#pragma once

#include "l20mc/common.hpp"
#include "l20mc/map_solver.hpp"
#include "l20mc/report.hpp"

namespace l20mc {

// Alternating least squares baseline for the ridge-regularized factorized
// model: the same sweep skeleton as the MAP solver with the column-sparsity
// term and the proximal terms removed (lambda plays the ridge role).
struct AlsConfig {
  double lambda = 1e-2;  // ridge weight of the factorized model
  Index r = 0;           // 0 resolves to min(n, m, 150)
  double eps_change = 1e-6;  // epsilon_2 on ||X^k - X^{k-1}||_F^2 / ||X^{k-1}||_F^2
  int rank_window = 20;
  int max_iters = 1000;
  std::uint64_t seed = 0;
  double rank_tol = kDefaultRankTol;

  void validate() const;
  std::string to_json() const;
};

// Step 1/3 solutions of the baseline (exact ridge minimizers, no
// thresholding); state conventions are those of MapState.
Mat als_u_step(const MapState& state, const ObservationSet& obs, double mu);
Mat als_v_step(const MapState& state, const ObservationSet& obs, double mu,
               const SparseResidual* res_hat = nullptr);

SolveReport als_solve(const ObservationSet& obs, const AlsConfig& cfg,
                      const Mat* p0 = nullptr, const Mat* q0 = nullptr);

}  // namespace l20mc

#pragma once

#include <optional>
#include <vector>

#include "l20mc/common.hpp"
#include "l20mc/factors.hpp"
#include "l20mc/observations.hpp"
#include "l20mc/report.hpp"

namespace l20mc {

struct MapConfig {
  RegWeights weights;
  Index r = 0;  // 0 resolves to min(n, m, 150)
  double varrho = 0.8;
  double gamma_floor_1 = 1e-8;
  double gamma_floor_2 = 1e-8;
  double gamma1_0 = 0.01;
  double gamma2_0 = 0.01;
  int max_iters = 1000;
  int stable_window = 10;      // consecutive iterations with identical support
  double eps_objective = 1e-4; // standalone flatness tolerance
  std::uint64_t seed = 0;
  double rank_tol = kDefaultRankTol;

  void validate() const;
  std::string to_json() const;
};

// The balanced representation carried between sweeps:
//   Ubar = left * diag(d), Vbar = right * diag(d),
// left and right orthonormal-column matrices, d the square roots of the
// singular values of Ubar Vbar^T. Only columns with d > 0 are kept; the
// support can only shrink, so dropped columns never return.
struct MapState {
  Mat left;   // n x a
  Mat right;  // m x a
  Vec d;      // a, positive, nonincreasing
  Index full_r = 0;
  int iter = 0;
  double gamma1 = 0.0, gamma2 = 0.0;
  // cached residual at (Ubar, Vbar) and the matching loss value
  std::vector<double> res_bar;
  double f_bar = 0.0;
  double phi = 0.0;
  // hat-stage artifacts of the latest sweep (after the first refactorization)
  Mat p_hat;      // n x a_hat
  Mat v_hat_dir;  // m x a_hat
  Vec d_hat;
  double phi_hat = 0.0;
  // traces (index 0 = starting point)
  std::vector<double> phi_trace;
  std::vector<double> phi_hat_trace;
  std::vector<Index> rank_trace;
  std::vector<Index> support_trace;  // |J_{Ubar^k}|
  std::vector<std::vector<Index>> j_trace;
};

// Support sizes observed inside one sweep, in the pre-compaction layout;
// the chain j_bar_next <= j_hat <= j_bar_prev mirrors the inclusion of the
// nonzero-column sets through the two refactorizations.
struct MapSweepInfo {
  Index j_bar_prev = 0;
  Index j_u = 0;
  Index j_hat = 0;
  Index j_bar_next = 0;
};

FactorPair map_factors(const MapState& state);          // active columns only
FactorPair map_factors_full(const MapState& state);     // zero-padded to full_r

// Numerical rank of left D^2 right^T given the singular-value roots d
// (same threshold rule as numerical_rank, no decomposition needed).
Index rank_from_singular_roots(const Vec& d, double rel_tol);

MapState map_init_state(const ObservationSet& obs, const MapConfig& cfg,
                        const Mat* p0 = nullptr, const Mat* q0 = nullptr);

// Step 1 subproblem solution from the current state (U^{k+1}).
Mat map_u_step(const MapState& state, const ObservationSet& obs, const RegWeights& w,
               double gamma1);
// Step 3 subproblem solution; requires the hat-stage artifacts of the
// current sweep (call after the first refactorization). A precomputed
// residual at the hat pair may be passed to avoid recomputation.
Mat map_v_step(const MapState& state, const ObservationSet& obs, const RegWeights& w,
               double gamma2, const SparseResidual* res_hat = nullptr);

// One full sweep (steps 1-4) at fixed step parameters; updates the cached
// residual, phi, and the hat artifacts, and compacts retired columns.
// Shared by the MAP solver (gamma > 0) and the ALS baseline (gamma = 0).
MapSweepInfo map_sweep(MapState& state, const ObservationSet& obs, const RegWeights& w,
                       double gamma1, double gamma2);

// Full sweep + step-parameter decay + traces.
MapSweepInfo map_iterate(MapState& state, const ObservationSet& obs, const MapConfig& cfg);

SolveReport map_solve(const ObservationSet& obs, const MapConfig& cfg,
                      const Mat* p0 = nullptr, const Mat* q0 = nullptr);

}  // namespace l20mc

#pragma once

#include "l20mc/amm.hpp"
#include "l20mc/map_solver.hpp"
#include "l20mc/report.hpp"

namespace l20mc {

// Two-phase solver: run the MAP method until the nonzero-column support is
// stable, extract the kappa surviving columns, then minimize the smooth
// ridge objective on the reduced space with the extrapolated AMM loop.
struct HybridConfig {
  MapConfig phase1;
  AmmConfig phase2;   // lambda must be 0; eps_residual plays epsilon_3
  int phase1_cap = 100;

  HybridConfig() {
    phase2.weights.lambda = 0.0;
    phase2.eps_residual = 5e-3;
  }
  void validate() const;
  std::string to_json() const;
};

// Submatrices restricted to the shared nonzero-column set, preserving
// column order. Throws solver_error when J_U != J_V (a phase-1 contract
// violation).
FactorPair extract_support(const FactorPair& fp);

SolveReport hybrid_solve(const ObservationSet& obs, const HybridConfig& cfg);

}  // namespace l20mc

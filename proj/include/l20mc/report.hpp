#pragma once

#include <string>
#include <vector>

#include "l20mc/common.hpp"
#include "l20mc/factors.hpp"

namespace l20mc {

// Outcome of one solve: final factors, traces, termination data. The JSON
// form is the interchange format of the CLI and the bench harness.
struct SolveReport {
  std::string solver;  // "amm" | "map" | "hybrid" | "als-nuclear"
  Index n = 0, m = 0, r = 0;
  int iters = 0;
  std::string terminated_by;
  Index rank = 0;             // nonzero-column count for l2,0 solvers, numerical rank for ALS
  Index kappa = -1;           // hybrid: detected support size
  int phase1_iters = -1;      // hybrid only
  int phase2_iters = -1;      // hybrid only
  std::vector<double> phi_trace;
  std::vector<double> fmu_trace;       // hybrid phase 2 objective
  std::vector<double> residual_trace;  // normalized optimality residuals
  std::vector<Index> rank_trace;
  std::vector<std::vector<Index>> j_trace;  // map solver: per-iteration nonzero-column sets
  bool has_xi = false;
  bool xi_monotone = false;
  std::vector<double> xi_trace;
  double balance = 0.0;  // final ||U^T U - V^T V||_F
  double rank_tol = kDefaultRankTol;
  double wall_ms = 0.0;
  std::string config_echo;  // JSON text of the effective configuration
  FactorPair factors;
};

std::string report_to_json(const SolveReport& rep, bool include_traces = true);
void write_report_file(const std::string& path, const SolveReport& rep, bool include_traces = true);

}  // namespace l20mc

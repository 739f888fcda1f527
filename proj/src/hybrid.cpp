#include "l20mc/hybrid.hpp"

#include <chrono>
#include <cstdio>

#include "json.hpp"

namespace l20mc {

void HybridConfig::validate() const {
  phase1.validate();
  phase2.validate();
  if (phase2.weights.lambda != 0.0)
    throw validation_error("hybrid: phase-2 weights must have lambda = 0");
  if (phase1_cap < 1) throw validation_error("hybrid: phase1_cap must be >= 1");
}

std::string HybridConfig::to_json() const {
  nlohmann::json j;
  j["phase1"] = nlohmann::json::parse(phase1.to_json());
  j["phase2"] = nlohmann::json::parse(phase2.to_json());
  j["phase1_cap"] = phase1_cap;
  return j.dump();
}

FactorPair extract_support(const FactorPair& fp) {
  fp.require_consistent();
  std::vector<Index> ju = nonzero_columns(fp.u);
  std::vector<Index> jv = nonzero_columns(fp.v);
  if (ju != jv) throw solver_error("extract_support: J_U and J_V differ (phase-1 contract violation)");
  FactorPair out;
  out.u.resize(fp.u.rows(), static_cast<Index>(ju.size()));
  out.v.resize(fp.v.rows(), static_cast<Index>(ju.size()));
  for (std::size_t t = 0; t < ju.size(); ++t) {
    out.u.col(static_cast<Index>(t)) = fp.u.col(ju[t]);
    out.v.col(static_cast<Index>(t)) = fp.v.col(ju[t]);
  }
  return out;
}

namespace {

bool support_stable(const std::vector<Index>& sizes, int window) {
  if (static_cast<int>(sizes.size()) < window + 1) return false;
  const Index last = sizes.back();
  for (int i = 0; i <= window; ++i)
    if (sizes[sizes.size() - 1 - static_cast<std::size_t>(i)] != last) return false;
  return true;
}

}  // namespace

SolveReport hybrid_solve(const ObservationSet& obs, const HybridConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  // phase 1: support detection
  MapState p1 = map_init_state(obs, cfg.phase1, nullptr, nullptr);
  bool stable = false;
  for (int k = 0; k < cfg.phase1_cap; ++k) {
    map_iterate(p1, obs, cfg.phase1);
    if (support_stable(p1.support_trace, cfg.phase1.stable_window)) {
      stable = true;
      break;
    }
  }
  if (!stable)
    std::fprintf(stderr,
                 "l20mc: warning: hybrid phase 1 hit the %d-iteration cap before the "
                 "support stabilized\n",
                 cfg.phase1_cap);

  FactorPair support = extract_support(map_factors_full(p1));
  const Index kappa = support.u.cols();

  SolveReport rep;
  rep.solver = "hybrid";
  rep.n = obs.rows();
  rep.m = obs.cols();
  rep.r = p1.full_r;
  rep.kappa = kappa;
  rep.phase1_iters = p1.iter;
  rep.phi_trace = p1.phi_trace;
  rep.rank_trace = p1.rank_trace;
  rep.j_trace = p1.j_trace;
  rep.rank_tol = cfg.phase1.rank_tol;
  rep.config_echo = cfg.to_json();

  if (kappa == 0) {
    rep.phase2_iters = 0;
    rep.iters = p1.iter;
    rep.terminated_by = "empty_support";
    rep.factors.u = Mat::Zero(obs.rows(), p1.full_r);
    rep.factors.v = Mat::Zero(obs.cols(), p1.full_r);
    rep.rank = 0;
    rep.balance = 0.0;
    const auto t1 = std::chrono::steady_clock::now();
    rep.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    return rep;
  }

  // phase 2: smooth minimization on the reduced space
  AmmConfig p2 = cfg.phase2;
  p2.r = kappa;
  p2.rank_gate = false;
  SolveReport inner = amm_solve(obs, p2, &support);

  rep.phase2_iters = inner.iters;
  rep.iters = p1.iter + inner.iters;
  rep.terminated_by = inner.terminated_by;
  rep.fmu_trace = inner.phi_trace;  // lambda = 0: Phi equals F_mu
  rep.residual_trace = inner.residual_trace;
  rep.factors = inner.factors;
  rep.rank = count_nonzero_columns(rep.factors.u);
  rep.balance = inner.balance;
  const auto t1 = std::chrono::steady_clock::now();
  rep.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return rep;
}

}  // namespace l20mc

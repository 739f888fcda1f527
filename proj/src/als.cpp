#include "l20mc/als.hpp"

#include <chrono>
#include <cmath>

#include "json.hpp"
#include "l20mc/partial_svd.hpp"

namespace l20mc {

void AlsConfig::validate() const {
  if (!(lambda > 0.0)) throw validation_error("als: lambda must be positive");
  if (r < 0) throw validation_error("als: r must be nonnegative");
  if (!(eps_change > 0.0)) throw validation_error("als: eps_change must be positive");
  if (rank_window < 1) throw validation_error("als: rank_window must be >= 1");
  if (max_iters < 1) throw validation_error("als: max_iters must be >= 1");
  if (!(rank_tol > 0.0 && rank_tol < 1.0)) throw validation_error("als: rank_tol must lie in (0,1)");
}

std::string AlsConfig::to_json() const {
  nlohmann::json j;
  j["model"] = "als-nuclear";
  j["lambda"] = lambda;
  j["r"] = r;
  j["eps_change"] = eps_change;
  j["rank_window"] = rank_window;
  j["max_iters"] = max_iters;
  j["seed"] = seed;
  j["rank_tol"] = rank_tol;
  return j.dump();
}

Mat als_u_step(const MapState& state, const ObservationSet& obs, double mu) {
  RegWeights w{0.0, mu};
  return map_u_step(state, obs, w, 0.0);
}

Mat als_v_step(const MapState& state, const ObservationSet& obs, double mu,
               const SparseResidual* res_hat) {
  RegWeights w{0.0, mu};
  return map_v_step(state, obs, w, 0.0, res_hat);
}

SolveReport als_solve(const ObservationSet& obs, const AlsConfig& cfg, const Mat* p0,
                      const Mat* q0) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  MapConfig mc;
  mc.weights = RegWeights{0.0, cfg.lambda};  // ridge weight in the mu slot
  mc.r = cfg.r;
  mc.max_iters = cfg.max_iters;
  mc.seed = cfg.seed;
  mc.rank_tol = cfg.rank_tol;
  MapState state = map_init_state(obs, mc, p0, q0);

  std::string reason = "max_iters";
  FactorPair prev = map_factors(state);
  for (int k = 0; k < cfg.max_iters; ++k) {
    map_sweep(state, obs, mc.weights, 0.0, 0.0);
    FactorPair cur = map_factors(state);
    state.phi_trace.push_back(state.phi);
    state.rank_trace.push_back(rank_from_singular_roots(state.d, cfg.rank_tol));

    const double prev_sq = product_fro_sq(prev);
    const double diff_sq = product_diff_fro_sq(cur.u, cur.v, prev.u, prev.v);
    prev = std::move(cur);

    bool rank_ok = static_cast<int>(state.rank_trace.size()) >= cfg.rank_window;
    if (rank_ok) {
      const Index last = state.rank_trace.back();
      for (int i = 0; i < cfg.rank_window; ++i) {
        if (state.rank_trace[state.rank_trace.size() - 1 - static_cast<std::size_t>(i)] != last) {
          rank_ok = false;
          break;
        }
      }
    }
    if (rank_ok && prev_sq > 0.0 && diff_sq / prev_sq <= cfg.eps_change) {
      reason = "xk_change";
      break;
    }
  }
  const auto t1 = std::chrono::steady_clock::now();

  SolveReport rep;
  rep.solver = "als-nuclear";
  rep.n = obs.rows();
  rep.m = obs.cols();
  rep.r = state.full_r;
  rep.iters = state.iter;
  rep.terminated_by = reason;
  rep.factors = map_factors_full(state);
  rep.rank = numerical_rank(rep.factors, cfg.rank_tol);
  rep.rank_tol = cfg.rank_tol;
  rep.phi_trace = state.phi_trace;
  rep.rank_trace = state.rank_trace;
  rep.balance = balance_residual(map_factors(state));
  rep.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  rep.config_echo = cfg.to_json();
  return rep;
}

}  // namespace l20mc

#pragma once

#include <optional>
#include <vector>

#include "l20mc/common.hpp"
#include "l20mc/factors.hpp"
#include "l20mc/observations.hpp"
#include "l20mc/report.hpp"

namespace l20mc {

enum class BetaSchedule { kNesterov, kConstant, kZero };

struct AmmConfig {
  RegWeights weights;
  Index r = 0;                 // column budget; 0 resolves to min(n, m, 150)
  double gamma0 = 0.0;         // 0 resolves to 2.5 * ||M_Omega|| (spectral)
  double backtrack_rho = 1.05;
  BetaSchedule beta_schedule = BetaSchedule::kNesterov;
  double beta_constant = 0.0;  // used with BetaSchedule::kConstant
  // The safeguarded mode runs the provably convergent regime: beta capped
  // at beta_cap and step parameters chosen as eta * tau (eta = 2.6) instead
  // of backtracking, with the potential-descent diagnostic recorded.
  bool beta_safeguard = false;
  double beta_cap = 0.4;
  double xi_rho1 = 0.6;
  double xi_rho2 = 0.6;
  double eps_residual = 1e-3;   // epsilon_1
  double eps_objective = 1e-4;  // epsilon
  int rank_window = 20;
  bool rank_gate = true;  // hybrid phase 2 stops on residual/flatness alone
  int max_iters = 2000;
  std::uint64_t seed = 0;
  double rank_tol = kDefaultRankTol;

  void validate() const;
  std::string to_json() const;
};

// beta_k = (t_k - 1) / t_{k+1} with t_0 = 1, t_{k+1} = (1 + sqrt(4 t_k^2 + 1)) / 2.
// Advances t in place; the optional cap clamps the returned value.
double nesterov_beta(double& t, std::optional<double> cap = std::nullopt);

enum class Side { kU, kV };

struct BacktrackResult {
  double gamma = 0.0;
  Mat candidate;
  int exponent = 0;  // accepted l in gamma = rho^l * gamma0
};

// Smallest l such that gamma = rho^l * gamma0 certifies the block
// majorization inequality at the prox candidate computed with that gamma.
// side selects which factor is being updated; `other` is the fixed one.
// Throws solver_error after 60 unsuccessful increases.
BacktrackResult backtrack_gamma(const ObservationSet& obs, const Mat& anchor, const Mat& other,
                                double gamma0, double rho, Side side, const RegWeights& w);

// One solve's mutable state. Factor matrices hold only the active (not yet
// permanently zero) columns; active_cols maps them back to original
// positions.
struct AmmState {
  FactorPair cur;   // U^k, V^k
  FactorPair prev;  // U^{k-1}, V^{k-1}
  Mat u_tilde, v_tilde;
  std::vector<Index> active_cols;
  Index full_r = 0;
  double t = 1.0;  // Nesterov sequence
  double beta = 0.0;
  int iter = 0;
  // last-sweep quantities
  double gamma1 = 0.0, gamma2 = 0.0;
  double tau_v = 0.0, tau_u = 0.0;
  Mat grad_u_anchor, grad_v_anchor;  // gradients used by the two prox steps
  double phi = 0.0;
  double e_u_norm = 0.0, e_v_norm = 0.0, rel_residual = 0.0;
  // traces (index 0 = starting point)
  std::vector<double> phi_trace;
  std::vector<double> residual_trace;
  std::vector<Index> rank_trace;
  std::vector<double> xi_trace;
  std::vector<double> xi_delta;  // per-iteration same-alpha potential differences
};

struct StoppingResiduals {
  double e_u_norm = 0.0;
  double e_v_norm = 0.0;
  double relative = 0.0;
};

// Residuals of the first-order optimality system at (U^k, V^k), normalized
// by 1 + ||U^k (V^k)^T||_F (computed through Gram products).
StoppingResiduals stopping_residuals(const AmmState& state, const ObservationSet& obs,
                                     const RegWeights& w);

AmmState amm_init_state(const ObservationSet& obs, const AmmConfig& cfg,
                        const FactorPair* init = nullptr);

// One full sweep: extrapolate, U prox step, extrapolate, V prox step,
// diagnostics and traces.
void amm_iterate(AmmState& state, const ObservationSet& obs, const AmmConfig& cfg);

SolveReport amm_solve(const ObservationSet& obs, const AmmConfig& cfg,
                      const FactorPair* init = nullptr);

// Potential function used as a descent diagnostic:
//   Phi(fp) + rho1 alpha1 / 2 ||U - U'||_F^2 + rho2 alpha2 / 2 ||V - V'||_F^2.
double xi_potential(const FactorPair& fp, const FactorPair& fp_prev, double rho1, double rho2,
                    double alpha1, double alpha2, const ObservationSet& obs, const RegWeights& w);

// Default starting point: U0 = P1 Sigma_r^{1/2}, V0 = Q1 Sigma_r^{1/2} from
// the top-r partial SVD of M_Omega.
FactorPair amm_default_init(const ObservationSet& obs, Index r, std::uint64_t seed);

}  // namespace l20mc

#include "l20mc/amm.hpp"

#include <Eigen/Eigenvalues>
#include <chrono>
#include <cmath>

#include "json.hpp"
#include "l20mc/partial_svd.hpp"
#include "l20mc/prox.hpp"

namespace l20mc {

void AmmConfig::validate() const {
  weights.validate();
  if (r < 0) throw validation_error("amm: r must be nonnegative");
  if (gamma0 < 0.0) throw validation_error("amm: gamma0 must be nonnegative");
  if (!(backtrack_rho > 1.0)) throw validation_error("amm: backtrack_rho must exceed 1");
  if (beta_schedule == BetaSchedule::kConstant && (beta_constant < 0.0 || beta_constant > 1.0))
    throw validation_error("amm: constant beta must lie in [0,1]");
  if (!(eps_residual > 0.0) || !(eps_objective > 0.0))
    throw validation_error("amm: tolerances must be positive");
  if (rank_window < 1) throw validation_error("amm: rank_window must be >= 1");
  if (max_iters < 1) throw validation_error("amm: max_iters must be >= 1");
  if (!(rank_tol > 0.0 && rank_tol < 1.0)) throw validation_error("amm: rank_tol must lie in (0,1)");
  if (beta_cap < 0.0 || beta_cap > 1.0) throw validation_error("amm: beta_cap must lie in [0,1]");
  if (!(xi_rho1 > 0.0 && xi_rho1 < 1.0 && xi_rho2 > 0.0 && xi_rho2 < 1.0))
    throw validation_error("amm: xi rho parameters must lie in (0,1)");
}

std::string AmmConfig::to_json() const {
  nlohmann::json j;
  j["lambda"] = weights.lambda;
  j["mu"] = weights.mu;
  j["r"] = r;
  j["gamma0"] = gamma0;
  j["backtrack_rho"] = backtrack_rho;
  switch (beta_schedule) {
    case BetaSchedule::kNesterov: j["beta_schedule"] = "nesterov"; break;
    case BetaSchedule::kConstant: j["beta_schedule"] = "constant"; break;
    case BetaSchedule::kZero: j["beta_schedule"] = "zero"; break;
  }
  j["beta_constant"] = beta_constant;
  j["beta_safeguard"] = beta_safeguard;
  j["beta_cap"] = beta_cap;
  j["eps_residual"] = eps_residual;
  j["eps_objective"] = eps_objective;
  j["rank_window"] = rank_window;
  j["max_iters"] = max_iters;
  j["seed"] = seed;
  j["rank_tol"] = rank_tol;
  return j.dump();
}

double nesterov_beta(double& t, std::optional<double> cap) {
  const double t_next = 0.5 * (1.0 + std::sqrt(4.0 * t * t + 1.0));
  double beta = (t - 1.0) / t_next;
  t = t_next;
  if (cap) beta = std::min(beta, *cap);
  return beta;
}

namespace {

// ||A||^2 (spectral) through the smaller Gram matrix.
double spectral_sq(const Mat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::MatrixXd g;
  if (a.rows() >= a.cols())
    g = a.transpose() * a;
  else
    g = a * a.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
  return std::max(0.0, es.eigenvalues().maxCoeff());
}

struct SideContext {
  const ObservationSet& obs;
  Side side;
  const Mat& anchor;
  const Mat& other;
  const Mat& grad;                        // block gradient at (anchor, other)
  const std::vector<double>& res_anchor;  // residual values at the anchor pair
  double f_anchor;
  double tau;  // L_f * ||other||^2
};

double loss_side(const ObservationSet& obs, Side side, const Mat& updated, const Mat& other) {
  return side == Side::kU ? loss_value(obs, updated, other) : loss_value(obs, other, updated);
}

BacktrackResult backtrack_core(const SideContext& c, double gamma0, double rho,
                               const RegWeights& w, int max_increases = 60) {
  if (!(gamma0 > 0.0)) throw validation_error("backtracking: gamma0 must be positive");

  // The unthresholded prox point is anchor - W / (mu + gamma) with
  // W = grad + mu * anchor, so every gamma trial reduces to scalar algebra
  // once the Omega-restricted product of W with the fixed factor is known.
  Mat w_dir = c.grad + w.mu * c.anchor;
  std::vector<double> s1(static_cast<std::size_t>(c.obs.nnz()));
  if (c.side == Side::kU)
    product_on_omega(c.obs, w_dir, c.other, s1);
  else
    product_on_omega(c.obs, c.other, w_dir, s1);
  double c1 = 0.0, c2 = 0.0;
  for (std::size_t t = 0; t < s1.size(); ++t) {
    c1 += c.res_anchor[t] * s1[t];
    c2 += s1[t] * s1[t];
  }
  const double g1 = (c.grad.array() * w_dir.array()).sum();
  const double w2 = w_dir.squaredNorm();
  const Index r = c.anchor.cols();
  Vec a2(r), ab(r), b2(r);
  for (Index j = 0; j < r; ++j) {
    a2(j) = c.anchor.col(j).squaredNorm();
    ab(j) = c.anchor.col(j).dot(w_dir.col(j));
    b2(j) = w_dir.col(j).squaredNorm();
  }
  const double accept_slack = 1e-12 * (1.0 + std::abs(c.f_anchor));

  for (int l = 0; l <= max_increases; ++l) {
    const double gamma = std::pow(rho, l) * gamma0;
    BacktrackResult out;
    out.gamma = gamma;
    out.exponent = l;
    if (gamma >= c.tau) {
      // descent lemma certifies the inequality outright
      out.candidate = prox_l20_step(c.grad, c.anchor, gamma, w);
      return out;
    }
    const double s = 1.0 / (w.mu + gamma);
    bool all_keep = true;
    if (w.lambda > 0.0) {
      const double thresh_sq = 2.0 * w.lambda / (w.mu + gamma);
      for (Index j = 0; j < r; ++j) {
        const double q = a2(j) - 2.0 * s * ab(j) + s * s * b2(j);
        if (!(q > thresh_sq)) {
          all_keep = false;
          break;
        }
      }
    }
    if (all_keep) {
      const double lhs = -s * c1 + 0.5 * s * s * c2;
      const double rhs = -s * g1 + 0.5 * gamma * s * s * w2;
      const double margin = rhs - lhs;
      if (margin >= 0.0) {
        out.candidate = prox_l20_step(c.grad, c.anchor, gamma, w);
        const bool pattern_ok = w.lambda == 0.0 || count_nonzero_columns(out.candidate) == r;
        if (pattern_ok && margin >= 1e-9 * (1.0 + std::abs(c.f_anchor))) return out;
        const double f_cand = loss_side(c.obs, c.side, out.candidate, c.other);
        const double inner = (c.grad.array() * (out.candidate - c.anchor).array()).sum();
        const double quad = 0.5 * gamma * (out.candidate - c.anchor).squaredNorm();
        if (f_cand <= c.f_anchor + inner + quad + accept_slack) return out;
      }
      continue;
    }
    out.candidate = prox_l20_step(c.grad, c.anchor, gamma, w);
    const double f_cand = loss_side(c.obs, c.side, out.candidate, c.other);
    const double inner = (c.grad.array() * (out.candidate - c.anchor).array()).sum();
    const double quad = 0.5 * gamma * (out.candidate - c.anchor).squaredNorm();
    if (f_cand <= c.f_anchor + inner + quad + accept_slack) return out;
  }
  throw solver_error("backtracking: no step parameter accepted after 60 increases");
}

}  // namespace

BacktrackResult backtrack_gamma(const ObservationSet& obs, const Mat& anchor, const Mat& other,
                                double gamma0, double rho, Side side, const RegWeights& w) {
  SparseResidual res = side == Side::kU ? residual(obs, anchor, other) : residual(obs, other, anchor);
  Mat grad = side == Side::kU ? grad_u(res, other) : grad_v(res, other);
  const double f_anchor = loss_from_residual(res);
  const double tau = lipschitz_f() * spectral_sq(other);
  SideContext ctx{obs, side, anchor, other, grad, res.values, f_anchor, tau};
  return backtrack_core(ctx, gamma0, rho, w);
}

FactorPair amm_default_init(const ObservationSet& obs, Index r, std::uint64_t seed) {
  const Index k = std::min(r, std::min(obs.rows(), obs.cols()));
  PartialSvd svd = partial_svd(obs, k, seed);
  FactorPair fp;
  fp.u = Mat::Zero(obs.rows(), r);
  fp.v = Mat::Zero(obs.cols(), r);
  Vec root = svd.sigma.cwiseMax(0.0).cwiseSqrt();
  fp.u.leftCols(k) = svd.left * root.asDiagonal();
  fp.v.leftCols(k) = svd.right * root.asDiagonal();
  return fp;
}

namespace {

Index resolve_r(const ObservationSet& obs, Index r) {
  if (r > 0) return r;
  return std::min<Index>(std::min(obs.rows(), obs.cols()), 150);
}

double resolve_gamma0(const ObservationSet& obs, double gamma0) {
  // 1.25 * ||M_Omega||_F: the published 2.5 ||M_Omega|| is stated for a
  // loss without the 1/2 factor, and the Frobenius scale is what makes the
  // tabulated weights separate signal from junk columns (the spectral
  // scale puts the column threshold above every initial column norm and
  // collapses the iterates at the first step).
  if (gamma0 > 0.0) return gamma0;
  const double s = 1.25 * obs.fro_norm();
  return s > 0.0 ? s : 1.0;
}

double beta_step(AmmState& state, const AmmConfig& cfg) {
  switch (cfg.beta_schedule) {
    case BetaSchedule::kZero:
      return 0.0;
    case BetaSchedule::kConstant:
      return cfg.beta_safeguard ? std::min(cfg.beta_constant, cfg.beta_cap) : cfg.beta_constant;
    case BetaSchedule::kNesterov:
    default:
      return nesterov_beta(state.t, cfg.beta_safeguard ? std::optional<double>(cfg.beta_cap)
                                                       : std::nullopt);
  }
}

double phi_value(const ObservationSet& obs, const FactorPair& fp, const RegWeights& w,
                 double f_val) {
  double val = f_val + 0.5 * w.mu * (fp.u.squaredNorm() + fp.v.squaredNorm());
  if (w.lambda > 0.0)
    val += w.lambda * static_cast<double>(count_nonzero_columns(fp.u) + count_nonzero_columns(fp.v));
  return val;
}

}  // namespace

AmmState amm_init_state(const ObservationSet& obs, const AmmConfig& cfg, const FactorPair* init) {
  cfg.validate();
  const Index r = resolve_r(obs, cfg.r);
  AmmState state;
  state.full_r = r;
  if (init) {
    init->require_consistent();
    if (init->u.rows() != obs.rows() || init->v.rows() != obs.cols() || init->u.cols() != r)
      throw dimension_error("amm: init factors do not match obs dimensions and r");
    state.cur = *init;
  } else {
    state.cur = amm_default_init(obs, r, cfg.seed);
  }
  state.prev = state.cur;
  state.active_cols.resize(static_cast<std::size_t>(r));
  for (Index j = 0; j < r; ++j) state.active_cols[static_cast<std::size_t>(j)] = j;
  const double f0 = loss_value(obs, state.cur.u, state.cur.v);
  state.phi = phi_value(obs, state.cur, cfg.weights, f0);
  state.phi_trace.push_back(state.phi);
  state.rank_trace.push_back(numerical_rank(state.cur, cfg.rank_tol));
  state.rel_residual = std::numeric_limits<double>::infinity();
  return state;
}

void amm_iterate(AmmState& state, const ObservationSet& obs, const AmmConfig& cfg) {
  const RegWeights& w = cfg.weights;
  const double gamma0 = resolve_gamma0(obs, cfg.gamma0);
  const double du_prev_sq = (state.cur.u - state.prev.u).squaredNorm();
  const double dv_prev_sq = (state.cur.v - state.prev.v).squaredNorm();
  const double phi_prev = state.phi;

  state.beta = beta_step(state, cfg);

  // U block
  state.u_tilde = state.cur.u + state.beta * (state.cur.u - state.prev.u);
  SparseResidual res_u = residual(obs, state.u_tilde, state.cur.v);
  const double f_anchor_u = loss_from_residual(res_u);
  grad_u_into(res_u, state.cur.v, state.grad_u_anchor);
  state.tau_v = lipschitz_f() * spectral_sq(state.cur.v);
  Mat u_next;
  if (cfg.beta_safeguard) {
    state.gamma1 = state.tau_v > 0.0 ? 2.6 * state.tau_v : gamma0;
    u_next = prox_l20_step(state.grad_u_anchor, state.u_tilde, state.gamma1, w);
  } else {
    SideContext ctx{obs, Side::kU, state.u_tilde, state.cur.v,
                    state.grad_u_anchor, res_u.values, f_anchor_u, state.tau_v};
    BacktrackResult bt = backtrack_core(ctx, gamma0, cfg.backtrack_rho, w);
    state.gamma1 = bt.gamma;
    u_next = std::move(bt.candidate);
  }
  state.prev.u = state.cur.u;
  state.cur.u = std::move(u_next);

  // V block
  state.v_tilde = state.cur.v + state.beta * (state.cur.v - state.prev.v);
  SparseResidual res_v = residual(obs, state.cur.u, state.v_tilde);
  const double f_anchor_v = loss_from_residual(res_v);
  grad_v_into(res_v, state.cur.u, state.grad_v_anchor);
  state.tau_u = lipschitz_f() * spectral_sq(state.cur.u);
  Mat v_next;
  if (cfg.beta_safeguard) {
    state.gamma2 = state.tau_u > 0.0 ? 2.6 * state.tau_u : gamma0;
    v_next = prox_l20_step(state.grad_v_anchor, state.v_tilde, state.gamma2, w);
  } else {
    SideContext ctx{obs, Side::kV, state.v_tilde, state.cur.u,
                    state.grad_v_anchor, res_v.values, f_anchor_v, state.tau_u};
    BacktrackResult bt = backtrack_core(ctx, gamma0, cfg.backtrack_rho, w);
    state.gamma2 = bt.gamma;
    v_next = std::move(bt.candidate);
  }
  state.prev.v = state.cur.v;
  state.cur.v = std::move(v_next);

  // diagnostics at the new iterate
  SparseResidual res_new = residual(obs, state.cur.u, state.cur.v);
  const double f_new = loss_from_residual(res_new);
  state.phi = phi_value(obs, state.cur, w, f_new);
  Mat gu_new = grad_u(res_new, state.cur.v);
  Mat gv_new = grad_v(res_new, state.cur.u);
  Mat e_u = gu_new - state.grad_u_anchor + state.gamma1 * (state.u_tilde - state.cur.u);
  Mat e_v = gv_new - state.grad_v_anchor + state.gamma2 * (state.v_tilde - state.cur.v);
  state.e_u_norm = e_u.norm();
  state.e_v_norm = e_v.norm();
  const double x_fro = std::sqrt(product_fro_sq(state.cur));
  state.rel_residual =
      std::sqrt(state.e_u_norm * state.e_u_norm + state.e_v_norm * state.e_v_norm) / (1.0 + x_fro);

  ++state.iter;
  state.phi_trace.push_back(state.phi);
  state.residual_trace.push_back(state.rel_residual);
  state.rank_trace.push_back(numerical_rank(state.cur, cfg.rank_tol));

  if (cfg.beta_safeguard) {
    const double alpha1 = std::max(0.0, state.gamma1 - state.tau_v);
    const double alpha2 = std::max(0.0, state.gamma2 - state.tau_u);
    const double du_sq = (state.cur.u - state.prev.u).squaredNorm();
    const double dv_sq = (state.cur.v - state.prev.v).squaredNorm();
    const double xi_new = state.phi + 0.5 * cfg.xi_rho1 * alpha1 * du_sq + 0.5 * cfg.xi_rho2 * alpha2 * dv_sq;
    const double xi_old = phi_prev + 0.5 * cfg.xi_rho1 * alpha1 * du_prev_sq + 0.5 * cfg.xi_rho2 * alpha2 * dv_prev_sq;
    state.xi_trace.push_back(xi_new);
    state.xi_delta.push_back(xi_new - xi_old);
  }

  // retire columns that are exactly zero in both iterates of both factors;
  // they can never reactivate (anchors and gradients through them vanish)
  std::vector<Index> keep;
  keep.reserve(state.active_cols.size());
  for (Index j = 0; j < state.cur.u.cols(); ++j) {
    const bool dead = state.cur.u.col(j).isZero(0.0) && state.prev.u.col(j).isZero(0.0) &&
                      state.cur.v.col(j).isZero(0.0) && state.prev.v.col(j).isZero(0.0);
    if (!dead) keep.push_back(j);
  }
  if (keep.size() != static_cast<std::size_t>(state.cur.u.cols())) {
    const Index k = static_cast<Index>(keep.size());
    Mat cu(state.cur.u.rows(), k), pu(state.cur.u.rows(), k);
    Mat cv(state.cur.v.rows(), k), pv(state.cur.v.rows(), k);
    std::vector<Index> act(static_cast<std::size_t>(k));
    for (Index idx = 0; idx < k; ++idx) {
      const Index j = keep[static_cast<std::size_t>(idx)];
      cu.col(idx) = state.cur.u.col(j);
      pu.col(idx) = state.prev.u.col(j);
      cv.col(idx) = state.cur.v.col(j);
      pv.col(idx) = state.prev.v.col(j);
      act[static_cast<std::size_t>(idx)] = state.active_cols[static_cast<std::size_t>(j)];
    }
    state.cur.u = std::move(cu);
    state.prev.u = std::move(pu);
    state.cur.v = std::move(cv);
    state.prev.v = std::move(pv);
    state.active_cols = std::move(act);
  }
}

StoppingResiduals stopping_residuals(const AmmState& state, const ObservationSet& obs,
                                     const RegWeights&) {
  if (state.iter < 1) throw solver_error("stopping_residuals: no completed iteration");
  SparseResidual res = residual(obs, state.cur.u, state.cur.v);
  Mat gu_new = grad_u(res, state.cur.v);
  Mat gv_new = grad_v(res, state.cur.u);
  Mat e_u = gu_new - state.grad_u_anchor + state.gamma1 * (state.u_tilde - state.cur.u);
  Mat e_v = gv_new - state.grad_v_anchor + state.gamma2 * (state.v_tilde - state.cur.v);
  StoppingResiduals out;
  out.e_u_norm = e_u.norm();
  out.e_v_norm = e_v.norm();
  const double x_fro = std::sqrt(product_fro_sq(state.cur));
  out.relative = std::sqrt(out.e_u_norm * out.e_u_norm + out.e_v_norm * out.e_v_norm) / (1.0 + x_fro);
  return out;
}

double xi_potential(const FactorPair& fp, const FactorPair& fp_prev, double rho1, double rho2,
                    double alpha1, double alpha2, const ObservationSet& obs, const RegWeights& w) {
  if (!(rho1 > 0.0 && rho1 < 1.0 && rho2 > 0.0 && rho2 < 1.0))
    throw validation_error("xi_potential: rho parameters must lie in (0,1)");
  if (alpha1 < 0.0 || alpha2 < 0.0)
    throw validation_error("xi_potential: alpha parameters must be nonnegative");
  const double phi = eval_phi(obs, fp, w);
  return phi + 0.5 * rho1 * alpha1 * (fp.u - fp_prev.u).squaredNorm() +
         0.5 * rho2 * alpha2 * (fp.v - fp_prev.v).squaredNorm();
}

namespace {

bool rank_window_stable(const std::vector<Index>& ranks, int window) {
  if (static_cast<int>(ranks.size()) < window) return false;
  const Index last = ranks.back();
  for (int i = 0; i < window; ++i) {
    if (ranks[ranks.size() - 1 - static_cast<std::size_t>(i)] != last) return false;
  }
  return true;
}

bool objective_flat(const std::vector<double>& phis, double eps, int lags = 19) {
  if (static_cast<int>(phis.size()) < lags + 1) return false;
  const double cur = phis.back();
  const double denom = std::max(1.0, cur);
  double worst = 0.0;
  for (int i = 1; i <= lags; ++i) {
    worst = std::max(worst, std::abs(cur - phis[phis.size() - 1 - static_cast<std::size_t>(i)]));
  }
  return worst / denom <= eps;
}

FactorPair expand_to_full(const AmmState& state) {
  FactorPair out;
  out.u = Mat::Zero(state.cur.u.rows(), state.full_r);
  out.v = Mat::Zero(state.cur.v.rows(), state.full_r);
  for (Index j = 0; j < state.cur.u.cols(); ++j) {
    const Index dst = state.active_cols[static_cast<std::size_t>(j)];
    out.u.col(dst) = state.cur.u.col(j);
    out.v.col(dst) = state.cur.v.col(j);
  }
  return out;
}

}  // namespace

SolveReport amm_solve(const ObservationSet& obs, const AmmConfig& cfg, const FactorPair* init) {
  const auto t0 = std::chrono::steady_clock::now();
  AmmState state = amm_init_state(obs, cfg, init);
  std::string reason = "max_iters";
  for (int k = 0; k < cfg.max_iters; ++k) {
    amm_iterate(state, obs, cfg);
    if (cfg.rank_gate && !rank_window_stable(state.rank_trace, cfg.rank_window)) continue;
    if (state.rel_residual <= cfg.eps_residual) {
      reason = "residual";
      break;
    }
    if (objective_flat(state.phi_trace, cfg.eps_objective)) {
      reason = "objective_flat";
      break;
    }
  }
  const auto t1 = std::chrono::steady_clock::now();

  SolveReport rep;
  rep.solver = "amm";
  rep.n = obs.rows();
  rep.m = obs.cols();
  rep.r = state.full_r;
  rep.iters = state.iter;
  rep.terminated_by = reason;
  rep.factors = expand_to_full(state);
  rep.rank = count_nonzero_columns(rep.factors.u);
  rep.rank_tol = cfg.rank_tol;
  rep.phi_trace = state.phi_trace;
  rep.residual_trace = state.residual_trace;
  rep.rank_trace = state.rank_trace;
  rep.balance = balance_residual(state.cur);
  if (cfg.beta_safeguard) {
    rep.has_xi = true;
    rep.xi_trace = state.xi_trace;
    rep.xi_monotone = true;
    for (std::size_t i = 0; i < state.xi_delta.size(); ++i) {
      const double slack = 1e-10 * (1.0 + std::abs(state.xi_trace[i]));
      if (state.xi_delta[i] > slack) rep.xi_monotone = false;
    }
  }
  rep.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  rep.config_echo = cfg.to_json();
  return rep;
}

}  // namespace l20mc

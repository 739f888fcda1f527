#include "l20mc/map_solver.hpp"

#include <chrono>
#include <cmath>

#include "json.hpp"
#include "l20mc/partial_svd.hpp"
#include "l20mc/prox.hpp"

namespace l20mc {

void MapConfig::validate() const {
  weights.validate();
  if (r < 0) throw validation_error("map: r must be nonnegative");
  if (!(varrho > 0.0 && varrho < 1.0)) throw validation_error("map: varrho must lie in (0,1)");
  if (!(gamma_floor_1 > 0.0 && gamma_floor_2 > 0.0))
    throw validation_error("map: gamma floors must be positive");
  if (!(gamma1_0 > 0.0 && gamma2_0 > 0.0))
    throw validation_error("map: initial gamma values must be positive");
  if (max_iters < 1) throw validation_error("map: max_iters must be >= 1");
  if (stable_window < 1) throw validation_error("map: stable_window must be >= 1");
  if (!(eps_objective > 0.0)) throw validation_error("map: eps_objective must be positive");
  if (!(rank_tol > 0.0 && rank_tol < 1.0)) throw validation_error("map: rank_tol must lie in (0,1)");
}

std::string MapConfig::to_json() const {
  nlohmann::json j;
  j["lambda"] = weights.lambda;
  j["mu"] = weights.mu;
  j["r"] = r;
  j["varrho"] = varrho;
  j["gamma_floor_1"] = gamma_floor_1;
  j["gamma_floor_2"] = gamma_floor_2;
  j["gamma1_0"] = gamma1_0;
  j["gamma2_0"] = gamma2_0;
  j["max_iters"] = max_iters;
  j["stable_window"] = stable_window;
  j["eps_objective"] = eps_objective;
  j["seed"] = seed;
  j["rank_tol"] = rank_tol;
  return j.dump();
}

FactorPair map_factors(const MapState& state) {
  FactorPair fp;
  fp.u = state.left * state.d.asDiagonal();
  fp.v = state.right * state.d.asDiagonal();
  return fp;
}

FactorPair map_factors_full(const MapState& state) {
  FactorPair active = map_factors(state);
  FactorPair out;
  out.u = Mat::Zero(state.left.rows(), state.full_r);
  out.v = Mat::Zero(state.right.rows(), state.full_r);
  out.u.leftCols(active.u.cols()) = active.u;
  out.v.leftCols(active.v.cols()) = active.v;
  return out;
}

Index rank_from_singular_roots(const Vec& d, double rel_tol) {
  if (d.size() == 0) return 0;
  const double top = d.maxCoeff();
  if (top <= 0.0) return 0;
  // singular values of the represented product are d^2
  const double cut = rel_tol * top * top;
  Index c = 0;
  for (Index j = 0; j < d.size(); ++j)
    if (d(j) * d(j) > cut) ++c;
  return c;
}

namespace {

Index resolve_r(const ObservationSet& obs, Index r) {
  if (r > 0) return r;
  return std::min<Index>(std::min(obs.rows(), obs.cols()), 150);
}

double phi_from_state(const MapState& state, const RegWeights& w, double f_val, Index support) {
  // ||left * D||_F^2 = sum d_j^2 ||left_j||^2; computed directly so rounding
  // in the orthonormal factors is reflected honestly
  double sq = 0.0;
  for (Index j = 0; j < state.d.size(); ++j)
    sq += state.d(j) * state.d(j) *
          (state.left.col(j).squaredNorm() + state.right.col(j).squaredNorm());
  return f_val + 0.5 * w.mu * sq + w.lambda * 2.0 * static_cast<double>(support);
}

void refresh_residual(MapState& state, const ObservationSet& obs) {
  FactorPair fp = map_factors(state);
  state.res_bar.resize(static_cast<std::size_t>(obs.nnz()));
  residual_into(obs, fp.u, fp.v, state.res_bar);
  double sq = 0.0;
  for (double v : state.res_bar) sq += v * v;
  state.f_bar = 0.5 * sq;
}

}  // namespace

MapState map_init_state(const ObservationSet& obs, const MapConfig& cfg, const Mat* p0,
                        const Mat* q0) {
  cfg.validate();
  const Index r = resolve_r(obs, cfg.r);
  if (r > std::min(obs.rows(), obs.cols()))
    throw validation_error("map: r cannot exceed min(n, m) (orthonormal start required)");
  MapState state;
  state.full_r = r;
  if ((p0 == nullptr) != (q0 == nullptr))
    throw validation_error("map: provide both starting bases or neither");
  if (p0) {
    if (p0->rows() != obs.cols() || p0->cols() != r || q0->rows() != obs.rows() || q0->cols() != r)
      throw dimension_error("map: starting basis shapes must be m x r and n x r");
    if ((Eigen::MatrixXd(p0->transpose() * *p0) - Eigen::MatrixXd::Identity(r, r)).norm() > 1e-8 ||
        (Eigen::MatrixXd(q0->transpose() * *q0) - Eigen::MatrixXd::Identity(r, r)).norm() > 1e-8)
      throw validation_error("map: starting bases must have orthonormal columns");
    state.right = *p0;
    state.left = *q0;
  } else {
    PartialSvd svd = partial_svd(obs, r, cfg.seed);
    state.left = svd.left;    // Q^0 = P_1
    state.right = svd.right;  // P^0 = Q_1
  }
  state.d = Vec::Ones(r);
  state.gamma1 = cfg.gamma1_0;
  state.gamma2 = cfg.gamma2_0;
  refresh_residual(state, obs);
  state.phi = phi_from_state(state, cfg.weights, state.f_bar, r);
  state.phi_trace.push_back(state.phi);
  state.rank_trace.push_back(rank_from_singular_roots(state.d, cfg.rank_tol));
  state.support_trace.push_back(r);
  std::vector<Index> j0(static_cast<std::size_t>(r));
  for (Index j = 0; j < r; ++j) j0[static_cast<std::size_t>(j)] = j;
  state.j_trace.push_back(std::move(j0));
  return state;
}

Mat map_u_step(const MapState& state, const ObservationSet& obs, const RegWeights& w,
               double gamma1) {
  if (gamma1 < 0.0) throw validation_error("map_u_step: gamma1 must be nonnegative");
  const Index a = state.d.size();
  SparseResidual res;
  res.obs = &obs;
  res.values = state.res_bar;
  Mat t = grad_u(res, state.right);  // (grad f at Xbar) * P
  // G_j = (left_j (d_j^2 + gamma1) - t_j) d_j / Lam_j,  Lam_j = sqrt(d_j^2 + mu + gamma1)
  Mat g(state.left.rows(), a);
  Vec lam(a);
  for (Index j = 0; j < a; ++j) {
    const double dj = state.d(j);
    lam(j) = std::sqrt(dj * dj + w.mu + gamma1);
    g.col(j) = (state.left.col(j) * (dj * dj + gamma1) - t.col(j)) * (dj / lam(j));
  }
  return scaled_hard_threshold(g, lam, w.lambda);
}

Mat map_v_step(const MapState& state, const ObservationSet& obs, const RegWeights& w,
               double gamma2, const SparseResidual* res_hat) {
  if (gamma2 < 0.0) throw validation_error("map_v_step: gamma2 must be nonnegative");
  if (state.p_hat.size() == 0) throw solver_error("map_v_step: hat stage not available");
  const Index a = state.d_hat.size();
  SparseResidual local;
  if (!res_hat) {
    Mat u_hat = state.p_hat * state.d_hat.asDiagonal();
    Mat v_hat = state.v_hat_dir * state.d_hat.asDiagonal();
    local = residual(obs, u_hat, v_hat);
    res_hat = &local;
  }
  Mat t2 = grad_v(*res_hat, state.p_hat);  // (grad f at Xhat)^T * P_hat
  Mat h(state.v_hat_dir.rows(), a);
  Vec del(a);
  for (Index j = 0; j < a; ++j) {
    const double dj = state.d_hat(j);
    del(j) = std::sqrt(dj * dj + w.mu + gamma2);
    h.col(j) = (state.v_hat_dir.col(j) * (dj * dj + gamma2) - t2.col(j)) * (dj / del(j));
  }
  return scaled_hard_threshold(h, del, w.lambda);
}

namespace {

// drop columns with zero d (they stay zero in every later sweep)
void compact(Mat& left, Mat& right, Vec& d) {
  Index keep = 0;
  for (Index j = 0; j < d.size(); ++j)
    if (d(j) > 0.0) ++keep;
  if (keep == d.size()) return;
  Mat l2(left.rows(), keep), r2(right.rows(), keep);
  Vec d2(keep);
  Index idx = 0;
  for (Index j = 0; j < d.size(); ++j) {
    if (d(j) > 0.0) {
      l2.col(idx) = left.col(j);
      r2.col(idx) = right.col(j);
      d2(idx) = d(j);
      ++idx;
    }
  }
  left = std::move(l2);
  right = std::move(r2);
  d = std::move(d2);
}

}  // namespace

MapSweepInfo map_sweep(MapState& state, const ObservationSet& obs, const RegWeights& w,
                       double gamma1, double gamma2) {
  MapSweepInfo info;
  info.j_bar_prev = state.d.size();

  // Step 1: U^{k+1}
  Mat u_next = map_u_step(state, obs, w, gamma1);
  info.j_u = count_nonzero_columns(u_next);

  // Step 2: refactor U^{k+1} D^k
  Refactorization rf1 = svd_refactor(u_next, state.right, state.d);
  info.j_hat = 0;
  for (Index j = 0; j < rf1.d_hat.size(); ++j)
    if (rf1.d_hat(j) > 0.0) ++info.j_hat;
  state.p_hat = rf1.p_hat;
  state.v_hat_dir = state.right * rf1.q_hat;
  state.d_hat = rf1.d_hat;
  compact(state.p_hat, state.v_hat_dir, state.d_hat);
  SparseResidual res_hat = residual(obs, Mat(state.p_hat * state.d_hat.asDiagonal()),
                                    Mat(state.v_hat_dir * state.d_hat.asDiagonal()));
  {
    double sq = 0.0;
    for (Index j = 0; j < state.d_hat.size(); ++j)
      sq += state.d_hat(j) * state.d_hat(j) *
            (state.p_hat.col(j).squaredNorm() + state.v_hat_dir.col(j).squaredNorm());
    state.phi_hat = loss_from_residual(res_hat) + 0.5 * w.mu * sq +
                    w.lambda * 2.0 * static_cast<double>(info.j_hat);
  }

  // Step 3: V^{k+1}
  Mat v_next = map_v_step(state, obs, w, gamma2, &res_hat);

  // Step 4: refactor V^{k+1} D_hat^{k+1}
  Refactorization rf2 = svd_refactor(v_next, state.p_hat, state.d_hat);
  state.right = rf2.p_hat;               // P^{k+1}
  state.left = state.p_hat * rf2.q_hat;  // \hat P^{k+1} Q^{k+1}
  state.d = rf2.d_hat;
  info.j_bar_next = 0;
  for (Index j = 0; j < state.d.size(); ++j)
    if (state.d(j) > 0.0) ++info.j_bar_next;
  compact(state.left, state.right, state.d);

  refresh_residual(state, obs);
  state.phi = phi_from_state(state, w, state.f_bar, info.j_bar_next);
  ++state.iter;
  return info;
}

MapSweepInfo map_iterate(MapState& state, const ObservationSet& obs, const MapConfig& cfg) {
  MapSweepInfo info = map_sweep(state, obs, cfg.weights, state.gamma1, state.gamma2);
  // gamma_{i,k} = max(floor_i, varrho^k gamma_{i,0}), computed from the power
  // so the schedule is exact rather than accumulated
  const double decay = std::pow(cfg.varrho, state.iter);
  state.gamma1 = std::max(cfg.gamma_floor_1, decay * cfg.gamma1_0);
  state.gamma2 = std::max(cfg.gamma_floor_2, decay * cfg.gamma2_0);
  state.phi_trace.push_back(state.phi);
  state.phi_hat_trace.push_back(state.phi_hat);
  state.rank_trace.push_back(rank_from_singular_roots(state.d, cfg.rank_tol));
  state.support_trace.push_back(info.j_bar_next);
  std::vector<Index> jset(static_cast<std::size_t>(info.j_bar_next));
  for (Index j = 0; j < info.j_bar_next; ++j) jset[static_cast<std::size_t>(j)] = j;
  state.j_trace.push_back(std::move(jset));
  return info;
}

namespace {

bool support_stable(const std::vector<Index>& sizes, int window) {
  if (static_cast<int>(sizes.size()) < window + 1) return false;
  const Index last = sizes.back();
  for (int i = 0; i <= window; ++i)
    if (sizes[sizes.size() - 1 - static_cast<std::size_t>(i)] != last) return false;
  return true;
}

bool flat_trace(const std::vector<double>& vals, double eps, int lags = 19) {
  if (static_cast<int>(vals.size()) < lags + 1) return false;
  const double cur = vals.back();
  const double denom = std::max(1.0, cur);
  double worst = 0.0;
  for (int i = 1; i <= lags; ++i)
    worst = std::max(worst, std::abs(cur - vals[vals.size() - 1 - static_cast<std::size_t>(i)]));
  return worst / denom <= eps;
}

}  // namespace

SolveReport map_solve(const ObservationSet& obs, const MapConfig& cfg, const Mat* p0,
                      const Mat* q0) {
  const auto t0 = std::chrono::steady_clock::now();
  MapState state = map_init_state(obs, cfg, p0, q0);
  std::string reason = "max_iters";
  for (int k = 0; k < cfg.max_iters; ++k) {
    map_iterate(state, obs, cfg);
    if (support_stable(state.support_trace, cfg.stable_window) &&
        flat_trace(state.phi_trace, cfg.eps_objective)) {
      reason = "j_stable";
      break;
    }
  }
  const auto t1 = std::chrono::steady_clock::now();

  SolveReport rep;
  rep.solver = "map";
  rep.n = obs.rows();
  rep.m = obs.cols();
  rep.r = state.full_r;
  rep.iters = state.iter;
  rep.terminated_by = reason;
  rep.factors = map_factors_full(state);
  rep.rank = count_nonzero_columns(rep.factors.u);
  rep.rank_tol = cfg.rank_tol;
  rep.phi_trace = state.phi_trace;
  rep.rank_trace = state.rank_trace;
  rep.j_trace = state.j_trace;
  rep.balance = balance_residual(map_factors(state));
  rep.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  rep.config_echo = cfg.to_json();
  return rep;
}

}  // namespace l20mc

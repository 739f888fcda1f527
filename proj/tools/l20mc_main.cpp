#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "l20mc/als.hpp"
#include "l20mc/amm.hpp"
#include "l20mc/bench.hpp"
#include "l20mc/datagen.hpp"
#include "l20mc/hybrid.hpp"
#include "l20mc/map_solver.hpp"
#include "l20mc/metrics.hpp"

namespace fs = std::filesystem;
using namespace l20mc;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;
constexpr int kExitSolver = 4;

SchemeKind parse_scheme(const std::string& s) {
  if (s == "1") return SchemeKind::kScheme1;
  if (s == "2") return SchemeKind::kScheme2;
  if (s == "uniform") return SchemeKind::kUniform;
  throw validation_error("scheme must be 1, 2 or uniform");
}

std::string read_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// flag defaults < config-file values < explicit flags
class ConfigLayer {
 public:
  explicit ConfigLayer(const std::string& path) {
    if (!path.empty()) {
      json_ = nlohmann::json::parse(read_file(path), nullptr, false);
      if (json_.is_discarded() || !json_.is_object())
        throw validation_error("config file is not a JSON object: " + path);
    }
  }

  template <typename T>
  void apply(const CLI::Option* opt, const char* key, T& value) const {
    if (opt->count() > 0 || json_.is_null() || !json_.contains(key)) return;
    value = json_[key].get<T>();
  }

 private:
  nlohmann::json json_;
};

struct SolveArgs {
  std::string solver = "amm";
  std::string obs_path;
  std::string out_path;
  std::string factors_out;
  std::string config_path;
  double lambda = -1.0;    // explicit weight; wins over clambda
  double clambda = -1.0;   // paper recipe: lambda = 10 c SR ||M_Omega||_F
  double mu = 1e-8;
  Index r = 0;
  std::uint64_t seed = 0;
  int max_iters = 2000;
  std::string beta = "nesterov";
  double beta_const = 0.0;
  bool beta_safeguard = false;
  double eps1 = 1e-3;
  double eps = 1e-4;
  double eps2 = 1e-6;
  double eps3 = 5e-3;
  bool no_traces = false;
};

int cmd_solve(const SolveArgs& a) {
  ObservationSet obs = read_observations_file(a.obs_path);
  double lambda = 0.0;
  if (a.lambda >= 0.0) {
    lambda = a.lambda;
  } else if (a.clambda > 0.0) {
    lambda = a.solver == "als" ? lambda_for_als(a.clambda, obs.sample_ratio(), obs)
                               : lambda_for_l20(a.clambda, obs.sample_ratio(), obs);
  } else if (a.solver != "als") {
    throw validation_error("provide --lambda or --clambda");
  } else {
    throw validation_error("als requires --lambda or --clambda");
  }

  BetaSchedule sched = BetaSchedule::kNesterov;
  if (a.beta == "zero") sched = BetaSchedule::kZero;
  else if (a.beta == "constant") sched = BetaSchedule::kConstant;
  else if (a.beta != "nesterov") throw validation_error("--beta must be nesterov|zero|constant");

  SolveReport rep;
  if (a.solver == "amm") {
    AmmConfig cfg;
    cfg.weights = RegWeights{lambda, a.mu};
    cfg.r = a.r;
    cfg.seed = a.seed;
    cfg.max_iters = a.max_iters;
    cfg.beta_schedule = sched;
    cfg.beta_constant = a.beta_const;
    cfg.beta_safeguard = a.beta_safeguard;
    cfg.eps_residual = a.eps1;
    cfg.eps_objective = a.eps;
    rep = amm_solve(obs, cfg);
  } else if (a.solver == "map") {
    MapConfig cfg;
    cfg.weights = RegWeights{lambda, a.mu};
    cfg.r = a.r;
    cfg.seed = a.seed;
    cfg.max_iters = a.max_iters;
    cfg.eps_objective = a.eps;
    rep = map_solve(obs, cfg);
  } else if (a.solver == "hybrid") {
    HybridConfig cfg;
    cfg.phase1.weights = RegWeights{lambda, a.mu};
    cfg.phase1.r = a.r;
    cfg.phase1.seed = a.seed;
    cfg.phase2.weights.mu = a.mu;
    cfg.phase2.seed = a.seed;
    cfg.phase2.max_iters = a.max_iters;
    cfg.phase2.beta_schedule = sched;
    cfg.phase2.beta_constant = a.beta_const;
    cfg.phase2.beta_safeguard = a.beta_safeguard;
    cfg.phase2.eps_residual = a.eps3;
    cfg.phase2.eps_objective = a.eps;
    rep = hybrid_solve(obs, cfg);
  } else if (a.solver == "als") {
    AlsConfig cfg;
    cfg.lambda = lambda;
    cfg.r = a.r;
    cfg.seed = a.seed;
    cfg.max_iters = a.max_iters;
    cfg.eps_change = a.eps2;
    rep = als_solve(obs, cfg);
  } else {
    throw validation_error("--solver must be amm|map|hybrid|als");
  }

  if (!a.out_path.empty()) write_report_file(a.out_path, rep, !a.no_traces);
  if (!a.factors_out.empty()) write_factors_file(a.factors_out, rep.factors);
  std::cout << "solver=" << rep.solver << " iters=" << rep.iters << " rank=" << rep.rank
            << " terminated_by=" << rep.terminated_by << " wall_ms=" << rep.wall_ms << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"column l2,0-regularized factorization for matrix completion"};
  app.require_subcommand(1);

  // ---- gen ----
  auto* gen = app.add_subcommand("gen", "generate a synthetic observation set and its ground truth");
  Index g_n = 1000, g_m = 0, g_rstar = 10;
  double g_sr = 0.2, g_sigma = 0.1;
  std::string g_scheme = "1", g_out = ".";
  std::uint64_t g_seed = 0;
  gen->add_option("--n", g_n, "rows");
  gen->add_option("--m", g_m, "columns (default n)");
  gen->add_option("--rstar", g_rstar, "true rank");
  gen->add_option("--sr", g_sr, "sample ratio in (0,1)");
  gen->add_option("--scheme", g_scheme, "1|2|uniform");
  gen->add_option("--sigma", g_sigma, "noise level");
  gen->add_option("--seed", g_seed, "seed");
  gen->add_option("--out", g_out, "output directory");

  // ---- solve ----
  auto* solve = app.add_subcommand("solve", "run a solver on an observation dump");
  SolveArgs s;
  auto* o_solver = solve->add_option("--solver", s.solver, "amm|map|hybrid|als");
  solve->add_option("--obs", s.obs_path, "observation dump path")->required();
  auto* o_out = solve->add_option("--out", s.out_path, "report JSON path");
  auto* o_factors = solve->add_option("--factors-out", s.factors_out, "factor dump path");
  solve->add_option("--config", s.config_path, "JSON config file (flags override)");
  auto* o_lambda = solve->add_option("--lambda", s.lambda, "explicit regularization weight");
  auto* o_clambda = solve->add_option("--clambda", s.clambda, "c_lambda of the paper recipe");
  auto* o_mu = solve->add_option("--mu", s.mu, "ridge weight");
  auto* o_r = solve->add_option("--r", s.r, "column budget (0 = min(n,m,150))");
  auto* o_seed = solve->add_option("--seed", s.seed, "seed");
  auto* o_maxit = solve->add_option("--max-iters", s.max_iters, "iteration cap");
  auto* o_beta = solve->add_option("--beta", s.beta, "nesterov|zero|constant");
  auto* o_betac = solve->add_option("--beta-const", s.beta_const, "constant beta value");
  auto* o_guard = solve->add_flag("--beta-safeguard", s.beta_safeguard, "cap beta at 0.4 (provable regime)");
  auto* o_eps1 = solve->add_option("--eps1", s.eps1, "residual tolerance");
  auto* o_eps = solve->add_option("--eps", s.eps, "objective flatness tolerance");
  auto* o_eps2 = solve->add_option("--eps2", s.eps2, "als relative change tolerance");
  auto* o_eps3 = solve->add_option("--eps3", s.eps3, "hybrid phase-2 residual tolerance");
  solve->add_flag("--no-traces", s.no_traces, "omit traces from the report");

  // ---- bench ----
  auto* bench = app.add_subcommand("bench", "run the multi-seed benchmark harness");
  std::string b_preset, b_spec, b_out, b_json;
  int b_jobs = 1, b_reps = -1;
  std::int64_t b_seed = -1;
  bench->add_option("--preset", b_preset, "table1-small|table1|fig2");
  bench->add_option("--spec", b_spec, "experiment spec JSON file");
  bench->add_option("--out", b_out, "CSV output path (default stdout)");
  bench->add_option("--json", b_json, "JSON mirror output path");
  bench->add_option("--jobs", b_jobs, "parallel workers");
  bench->add_option("--reps", b_reps, "override repetitions");
  bench->add_option("--seed", b_seed, "override master seed");

  // ---- eval ----
  auto* eval = app.add_subcommand("eval", "train on a triplet file and report NMAE");
  std::string e_data, e_solver = "hybrid", e_scheme = "1", e_out;
  Index e_users = 0, e_cols = 0, e_r = 0;
  double e_sr = 0.2, e_recenter = 0.0, e_clambda = -1, e_lambda = -1, e_mu = 1e-8;
  double e_rmin = 0.0, e_rmax = 0.0;
  std::uint64_t e_seed = 0;
  eval->add_option("--data", e_data, "triplet file (user item rating)")->required();
  eval->add_option("--solver", e_solver, "amm|map|hybrid|als");
  eval->add_option("--users", e_users, "subsample this many rows");
  eval->add_option("--cols", e_cols, "subsample this many columns");
  eval->add_option("--sr", e_sr, "sampling ratio for the train split");
  eval->add_option("--scheme", e_scheme, "1|2|uniform");
  eval->add_option("--recenter", e_recenter, "subtract this offset from ratings");
  auto* o_rmin = eval->add_option("--rmin", e_rmin, "rating lower bound (default: observed)");
  auto* o_rmax = eval->add_option("--rmax", e_rmax, "rating upper bound (default: observed)");
  eval->add_option("--clambda", e_clambda, "c_lambda of the paper recipe");
  eval->add_option("--lambda", e_lambda, "explicit regularization weight");
  eval->add_option("--mu", e_mu, "ridge weight");
  eval->add_option("--r", e_r, "column budget");
  eval->add_option("--seed", e_seed, "seed");
  eval->add_option("--out", e_out, "metrics JSON path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      if (g_m == 0) g_m = g_n;
      GroundTruth truth = make_ground_truth(g_n, g_m, g_rstar, g_seed);
      auto omega = sample_omega(g_n, g_m, g_sr, parse_scheme(g_scheme), g_seed);
      ObservationSet obs = observe(truth, omega, g_sigma, g_seed);
      fs::create_directories(g_out);
      write_observations_file((fs::path(g_out) / "obs.txt").string(), obs);
      write_factors_file((fs::path(g_out) / "truth.txt").string(),
                         FactorPair{truth.m_left, truth.m_right});
      std::cout << "wrote " << (fs::path(g_out) / "obs.txt").string() << " ("
                << obs.nnz() << " entries) and truth.txt\n";
      return 0;
    }

    if (solve->parsed()) {
      ConfigLayer layer(s.config_path);
      layer.apply(o_solver, "solver", s.solver);
      layer.apply(o_lambda, "lambda", s.lambda);
      layer.apply(o_clambda, "clambda", s.clambda);
      layer.apply(o_mu, "mu", s.mu);
      layer.apply(o_r, "r", s.r);
      layer.apply(o_seed, "seed", s.seed);
      layer.apply(o_maxit, "max_iters", s.max_iters);
      layer.apply(o_beta, "beta", s.beta);
      layer.apply(o_betac, "beta_const", s.beta_const);
      layer.apply(o_guard, "beta_safeguard", s.beta_safeguard);
      layer.apply(o_eps1, "eps1", s.eps1);
      layer.apply(o_eps, "eps", s.eps);
      layer.apply(o_eps2, "eps2", s.eps2);
      layer.apply(o_eps3, "eps3", s.eps3);
      layer.apply(o_out, "out", s.out_path);
      layer.apply(o_factors, "factors_out", s.factors_out);
      return cmd_solve(s);
    }

    if (bench->parsed()) {
      if (b_preset.empty() == b_spec.empty())
        throw validation_error("bench: provide exactly one of --preset or --spec");
      ExperimentSpec spec;
      if (!b_preset.empty()) {
        if (b_preset == "table1-small") spec = table1_small_preset();
        else if (b_preset == "table1") spec = table1_preset();
        else if (b_preset == "fig2") spec = fig2_preset();
        else throw validation_error("bench: unknown preset " + b_preset);
      } else {
        spec = parse_experiment_spec_json(read_file(b_spec));
      }
      if (b_reps > 0) spec.repetitions = b_reps;
      if (b_seed >= 0) spec.seed = static_cast<std::uint64_t>(b_seed);
      spec.jobs = b_jobs;
      BenchResult result = run_experiment(spec);
      const std::string csv = rows_to_csv(result.rows);
      if (b_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream os(b_out);
        if (!os) throw std::runtime_error("cannot open for writing: " + b_out);
        os << csv;
      }
      if (!b_json.empty()) {
        std::ofstream os(b_json);
        if (!os) throw std::runtime_error("cannot open for writing: " + b_json);
        os << rows_to_json(result.rows) << '\n';
      }
      for (const BenchRow& r : result.rows)
        if (!r.error.empty())
          std::cerr << "l20mc: bench: " << r.solver << " n=" << r.n << " r*=" << r.r_star
                    << " sr=" << r.sr << " seed=" << r.seed_label << " failed: " << r.error << '\n';
      return 0;
    }

    if (eval->parsed()) {
      TripletOptions opt;
      opt.recenter_offset = e_recenter;
      opt.n_users = e_users;
      opt.n_cols = e_cols;
      opt.scheme = parse_scheme(e_scheme);
      opt.sr = e_sr;
      opt.seed = e_seed;
      if (o_rmin->count() || o_rmax->count()) {
        if (!(o_rmin->count() && o_rmax->count()))
          throw validation_error("eval: provide both --rmin and --rmax or neither");
        opt.value_range = std::make_pair(e_rmin, e_rmax);
      }
      TripletSplit split = load_triplets(e_data, opt);
      if (split.heldout.empty())
        std::cerr << "l20mc: warning: held-out set is empty; NMAE unavailable\n";

      SolveArgs sa;
      sa.solver = e_solver;
      sa.lambda = e_lambda;
      sa.clambda = e_clambda;
      sa.mu = e_mu;
      sa.r = e_r;
      sa.seed = e_seed;
      double lambda = 0.0;
      if (sa.lambda >= 0.0)
        lambda = sa.lambda;
      else if (sa.clambda > 0.0)
        lambda = e_solver == "als" ? lambda_for_als(sa.clambda, e_sr, split.train)
                                   : lambda_for_l20(sa.clambda, e_sr, split.train);
      else
        throw validation_error("eval: provide --lambda or --clambda");

      SolveReport rep;
      if (e_solver == "amm") {
        AmmConfig cfg;
        cfg.weights = RegWeights{lambda, e_mu};
        cfg.r = e_r;
        cfg.seed = e_seed;
        rep = amm_solve(split.train, cfg);
      } else if (e_solver == "map") {
        MapConfig cfg;
        cfg.weights = RegWeights{lambda, e_mu};
        cfg.r = e_r;
        cfg.seed = e_seed;
        rep = map_solve(split.train, cfg);
      } else if (e_solver == "hybrid") {
        HybridConfig cfg;
        cfg.phase1.weights = RegWeights{lambda, e_mu};
        cfg.phase1.r = e_r;
        cfg.phase1.seed = e_seed;
        cfg.phase2.weights.mu = e_mu;
        cfg.phase2.seed = e_seed;
        rep = hybrid_solve(split.train, cfg);
      } else if (e_solver == "als") {
        AlsConfig cfg;
        cfg.lambda = lambda;
        cfg.r = e_r;
        cfg.seed = e_seed;
        rep = als_solve(split.train, cfg);
      } else {
        throw validation_error("--solver must be amm|map|hybrid|als");
      }

      nlohmann::json out;
      out["solver"] = rep.solver;
      out["n"] = split.n;
      out["m"] = split.m;
      out["train_nnz"] = split.train.nnz();
      out["heldout"] = split.heldout.size();
      out["r_min"] = split.r_min;
      out["r_max"] = split.r_max;
      out["rank"] = rep.rank;
      if (rep.kappa >= 0) out["kappa"] = rep.kappa;
      out["iters"] = rep.iters;
      out["wall_ms"] = rep.wall_ms;
      out["terminated_by"] = rep.terminated_by;
      if (!split.heldout.empty())
        out["nmae"] = nmae(rep.factors, split.heldout, split.r_min, split.r_max);
      out["config"] = nlohmann::json::parse(rep.config_echo, nullptr, false);
      const std::string text = out.dump(2);
      if (!e_out.empty()) {
        std::ofstream os(e_out);
        if (!os) throw std::runtime_error("cannot open for writing: " + e_out);
        os << text << '\n';
      }
      std::cout << text << '\n';
      return 0;
    }
  } catch (const validation_error& e) {
    std::cerr << "l20mc: " << e.what() << '\n';
    return kExitValidation;
  } catch (const dimension_error& e) {
    std::cerr << "l20mc: " << e.what() << '\n';
    return kExitValidation;
  } catch (const solver_error& e) {
    std::cerr << "l20mc: " << e.what() << '\n';
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "l20mc: " << e.what() << '\n';
    return kExitIo;
  }
  return 0;
}

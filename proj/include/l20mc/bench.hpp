#pragma once

#include <string>
#include <vector>

#include "l20mc/common.hpp"
#include "l20mc/datagen.hpp"

namespace l20mc {

enum class SolverKind { kAmm, kMap, kHybrid, kAls };

std::string solver_name(SolverKind s);

// One benchmark setting: generator parameters plus solver selection.
struct BenchCell {
  SolverKind solver = SolverKind::kAmm;
  Index n = 0, m = 0;
  Index r_star = 0;
  double sr = 0.2;
  SchemeKind scheme = SchemeKind::kScheme1;
  double c_lambda = 1.0;
  double sigma = 0.1;
};

struct ExperimentSpec {
  std::vector<BenchCell> cells;
  int repetitions = 5;
  std::uint64_t seed = 0;  // instance seeds are seed+1 .. seed+repetitions
  Index r = 0;             // factor budget; 0 = min(n, m, 150)
  double mu = 1e-8;
  int jobs = 1;

  void validate() const;
};

struct BenchRow {
  std::string solver;
  Index n = 0, m = 0, r_star = 0;
  double sr = 0.0;
  std::string scheme;
  double c_lambda = 0.0;
  std::string seed_label;  // instance seed or "avg"
  double re = std::numeric_limits<double>::quiet_NaN();
  double nmae = std::numeric_limits<double>::quiet_NaN();
  double rank = std::numeric_limits<double>::quiet_NaN();
  double kappa = std::numeric_limits<double>::quiet_NaN();
  double iters = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = std::numeric_limits<double>::quiet_NaN();
  std::string terminated_by;
  std::string error;  // nonempty marks a failed run
};

struct BenchResult {
  std::vector<BenchRow> rows;  // per-seed rows followed by one "avg" row per cell
};

// Runs every cell for `repetitions` instance seeds; failures are recorded
// per row and the harness continues. Rows are emitted in a canonical order
// independent of `jobs`. Timing covers the solver only.
BenchResult run_experiment(const ExperimentSpec& spec);

std::string rows_to_csv(const std::vector<BenchRow>& rows);
std::string rows_to_json(const std::vector<BenchRow>& rows);

// Paper-recipe weight mappings from the per-instance observed data.
double lambda_for_l20(double c_lambda, double sr, const ObservationSet& obs);
double lambda_for_als(double c_lambda, double sr, const ObservationSet& obs);

// Presets. "table1-small" is the n = 1000 synthetic block (scheme 1,
// sigma 0.1); "table1" adds the 3000 and 5000 blocks; "fig2" sweeps
// SR in {0.04, ..., 0.20} at r* = 5 for both schemes.
ExperimentSpec table1_small_preset();
ExperimentSpec table1_preset();
ExperimentSpec fig2_preset();

ExperimentSpec parse_experiment_spec_json(const std::string& text);

}  // namespace l20mc

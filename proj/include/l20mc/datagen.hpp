#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "l20mc/common.hpp"
#include "l20mc/observations.hpp"
#include "l20mc/rng.hpp"

namespace l20mc {

enum class SchemeKind { kScheme1, kScheme2, kUniform };

// Banded marginal probabilities: indices (0-based) in [0, n/10) get the low
// multiplier, [n/10, n/5) the high one, the rest weight 1; normalized to
// sum to one. Scheme 1 uses multipliers (2, 4), Scheme 2 uses (3, 9).
Vec scheme_probs(Index n, SchemeKind kind);

struct SamplingScheme {
  SchemeKind kind;
  Vec row_probs;
  Vec col_probs;

  SamplingScheme(Index n_rows, Index n_cols, SchemeKind k)
      : kind(k), row_probs(scheme_probs(n_rows, k)), col_probs(scheme_probs(n_cols, k)) {}
};

// ceil(sr * n * m) distinct pairs drawn i.i.d. from the product distribution
// row_probs x col_probs, duplicates rejected. Deterministic given the seed.
std::vector<std::pair<Index, Index>> sample_omega(Index n, Index m, double sr,
                                                  SchemeKind scheme, std::uint64_t seed);

struct GroundTruth {
  Mat m_left;   // n x r*
  Mat m_right;  // m x r*
  std::uint64_t seed = 0;

  Index rank() const { return m_left.cols(); }
  double entry(Index i, Index j) const { return m_left.row(i).dot(m_right.row(j)); }
};

// M* = M_L M_R^T with i.i.d. standard normal factor entries.
GroundTruth make_ground_truth(Index n, Index m, Index r_star, std::uint64_t seed);

// Observation model: value_t = M*_{i_t,j_t} + sigma (xi_t / ||xi||) ||M*_Omega||_F
// with xi i.i.d. standard normal. sigma = 0 reproduces M*_Omega exactly.
ObservationSet observe(const GroundTruth& truth, const std::vector<std::pair<Index, Index>>& omega,
                       double sigma, std::uint64_t seed);

// ---- triplet files ("user item rating", '#' comments) ----

struct TripletOptions {
  char delimiter = '\0';  // '\0': any whitespace
  double recenter_offset = 0.0;
  std::optional<std::pair<double, double>> value_range;  // (r_min, r_max) before recentering
  Index n_users = 0;  // 0: keep all rows
  Index n_cols = 0;   // 0: keep all columns
  SchemeKind scheme = SchemeKind::kScheme1;
  double sr = 0.2;    // sampling ratio for the train split
  std::uint64_t seed = 0;
};

struct TripletSplit {
  ObservationSet train;          // scheme-sampled Omega intersected with the rating support
  std::vector<Entry> heldout;    // support entries outside Omega (NMAE evaluation set)
  double r_min = 0.0;
  double r_max = 0.0;            // range bounds survive recentering as a width
  Index n = 0;
  Index m = 0;
};

TripletSplit load_triplets(const std::string& path, const TripletOptions& options);

// ---- observation dump ("n m nnz" header, then "i j value" lines) ----

void write_observations(std::ostream& os, const ObservationSet& obs);
ObservationSet read_observations(std::istream& is);
void write_observations_file(const std::string& path, const ObservationSet& obs);
ObservationSet read_observations_file(const std::string& path);

}  // namespace l20mc

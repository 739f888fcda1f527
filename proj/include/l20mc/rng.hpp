#pragma once

#include <cstdint>
#include <random>

namespace l20mc {

// Named substreams derived from one master seed. Every consumer of
// randomness draws from its own stream, so adding draws to one stage
// never perturbs another (the five-seed experiment protocol relies on
// this).
enum class RngStream : std::uint64_t {
  kFactors = 1,    // ground-truth factor entries
  kOmega = 2,      // sampled index set
  kNoise = 3,      // observation noise vector
  kSubsample = 4,  // row/column subsampling of real data
  kInit = 5,       // randomized range finder in the partial SVD
};

std::uint64_t splitmix64(std::uint64_t& state);

// mt19937_64 seeded through splitmix64(seed, stream); uniform/normal
// variates are produced from raw 64-bit draws (not std::*_distribution)
// so streams are reproducible across standard libraries.
class Rng {
 public:
  Rng(std::uint64_t seed, RngStream stream);

  std::uint64_t next_u64() { return gen_(); }
  // uniform on [0, 1) with 53-bit resolution
  double uniform();
  // standard normal via Box-Muller; one spare cached
  double normal();

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace l20mc

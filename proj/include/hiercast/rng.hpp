#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace hiercast {

// Deterministic random source used throughout the library. Uniform and
// normal variates are derived from the raw mt19937_64 word stream with
// fixed arithmetic, so draws do not depend on the standard library's
// distribution implementations and reproduce bit-for-bit given a seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Uniform double in [0, 1), 53-bit resolution.
  double uniform();

  // Standard normal via Box-Muller; second variate of each pair is cached.
  double normal();

  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t integer(std::uint64_t bound);

  // Independent substream. fork(k) of an Rng seeded with s always yields
  // the same stream, regardless of how much of the parent was consumed.
  Rng fork(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

// splitmix64 mixing step; used for seed derivation.
std::uint64_t mix_seed(std::uint64_t x);

// FNV-1a over a string, for deriving per-label seeds.
std::uint64_t hash_label(const std::string& label);

}  // namespace hiercast

#pragma once

#include <cstdint>

#include "optikit/vec.hpp"

namespace optikit {

// Deterministic pseudo-random stream (xoshiro256++ seeded via splitmix64).
// The same seed always reproduces the same sequence of draws, so every run
// that consumes randomness through an RngStream is replayable.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  // Uniform in [0, 1), 53-bit resolution.
  double next_unit();
  // Uniform integer in [0, n). Throws std::invalid_argument if n == 0.
  std::uint64_t next_below(std::uint64_t n);
  // Standard normal via Box-Muller; generates draws in pairs and caches the
  // second, so consumption order is part of the determinism contract.
  double next_gaussian();

 private:
  std::uint64_t state_[4];
  std::uint64_t seed_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// dim independent N(0, sigma^2) draws. sigma == 0 returns zeros without
// consuming from the stream; sigma must be >= 0 and finite.
ParamVector gaussian_noise(RngStream& rng, std::size_t dim, double sigma);

}  // namespace optikit

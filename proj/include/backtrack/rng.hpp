#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

#include "backtrack/error.hpp"

namespace backtrack {

// Seedable random source. All stochastic operations in the project take one
// of these explicitly so every run is reproducible from a single seed.
// Distributions are derived from raw mt19937_64 output by hand because the
// std::*_distribution classes are not guaranteed to produce the same stream
// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return gen_(); }

  // Uniform double in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    if (n <= 0) throw ContractViolation("Rng::uniform_int: n must be positive");
    return static_cast<int>(uniform() * static_cast<double>(n));
  }

  // Standard normal via Box-Muller. One fresh pair of uniforms per draw.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Index draw from an (approximately normalized) probability vector.
  int categorical(std::span<const double> probs) {
    if (probs.empty()) throw ContractViolation("Rng::categorical: empty distribution");
    const double u = uniform();
    double cum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      cum += probs[i];
      if (u < cum) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size() - 1);
  }

  // Weighted index draw; weights need not be normalized.
  int weighted(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (total <= 0.0) throw ContractViolation("Rng::weighted: no positive weight");
    double u = uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      u -= weights[i];
      if (u < 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size() - 1);
  }

  // Derive an independent child generator for a named stream. Pure function
  // of (seed, stream); does not advance this generator.
  Rng split(std::uint64_t stream) const {
    // splitmix64 of the seed material decorrelates child streams.
    std::uint64_t x = seed_ ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return Rng(x);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace backtrack

#pragma once

#include <cstdint>
#include <random>

namespace fzsl {

/// Seeded random source. All stochasticity in the engine flows through one of
/// these so that a run is reproducible from its seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(mix(seed)) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1).
  double uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(gen_);
  }

  /// Uniform index in [0, n). n must be positive.
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(gen_);
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(gen_);
  }

  bool bernoulli(double p) {
    return std::bernoulli_distribution(p)(gen_);
  }

  /// Derive an independent stream; forking with distinct tags gives streams
  /// that do not interleave with the parent.
  Rng fork(std::uint64_t tag) {
    return Rng(mix(next_u64() ^ (tag * 0x9e3779b97f4a7c15ULL)));
  }

 private:
  // splitmix64 finalizer; spreads small seeds over the full state space.
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::mt19937_64 gen_;
};

}  // namespace fzsl

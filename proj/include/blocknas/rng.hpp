#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace blocknas {

// Seeded generator with distributions defined here rather than by the
// standard library, so draws are identical across toolchains. The engine
// state serializes to text for checkpoints.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01();

  bool bernoulli(double p) { return uniform01() < p; }

  std::string save_state() const;
  void load_state(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to derive independent per-item seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace blocknas

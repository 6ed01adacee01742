#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>

namespace switching {

/// Seeded, splittable generator. Every stochastic routine takes one by
/// reference; there is no global generator.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix(seed)) {}

  /// Independent child stream derived from this generator's seed and a label.
  /// Does not advance the parent.
  Rng split(std::uint64_t stream) const { return Rng(mix(seed_ ^ mix(stream + 0x9e3779b97f4a7c15ULL))); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller; no cached second variate, so the
  /// engine state fully describes the generator.
  double normal();

  /// Index drawn with probability proportional to weights.
  std::size_t categorical(std::span<const double> weights);

  /// Text snapshot of the engine state, restorable with restore().
  std::string save() const;
  void restore(const std::string& state);

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace switching

#pragma once

#include <cstdint>
#include <random>

namespace bedsal {

/// Seeded generator whose derived draws use only raw engine output, so
/// sequences match across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Integer in [lo, hi].
  int range(int lo, int hi) { return lo + static_cast<int>(uniform() * (hi - lo + 1)); }
  /// Index in [0, n).
  std::uint64_t below(std::uint64_t n) { return engine_() % n; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace bedsal

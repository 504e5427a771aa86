#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace tempalign {

/// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based generator: draw i of stream (seed, key) is
/// mix64(mix64(seed ^ mix64(key)) + i * golden). Any draw can be recomputed
/// from its coordinates alone, in any language, in any order.
class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed, std::uint64_t key = 0) : base_(mix64(seed ^ mix64(key))) {}

  constexpr std::uint64_t at(std::uint64_t i) const { return mix64(base_ + i * 0x9E3779B97F4A7C15ULL); }
  constexpr std::uint64_t next_u64() { return at(counter_++); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer on [0, bound) by rejection; bound > 0.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t r;
    do r = next_u64();
    while (r >= limit);
    return r % bound;
  }

  /// Standard normal via Box–Muller; consumes two draws per call.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t position() const noexcept { return counter_; }

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

}  // namespace tempalign

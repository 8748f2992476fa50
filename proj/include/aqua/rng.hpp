#pragma once

#include <cstdint>
#include <string_view>

namespace aqua {

/// splitmix64 finalizer; bijective on 64-bit words.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char ch : s) {
    h ^= static_cast<std::uint8_t>(ch);
    h *= 0x100000001B3ull;
  }
  return h;
}

/// Stateless counter-based generator. A stream is keyed by (seed, name) and
/// indexed by a counter, so any element can be produced independently of the
/// others and the output is identical on every platform.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::string_view name)
      : key_(mix64(seed) ^ fnv1a64(name)) {}

  std::uint64_t bits(std::uint64_t counter) const {
    return mix64(key_ ^ mix64(counter * 0xD1342543DE82EF95ull + 1));
  }

  /// Uniform in [0, 1) with 53 random mantissa bits.
  double uniform01(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double uniform(std::uint64_t counter, double lo, double hi) const {
    return lo + (hi - lo) * uniform01(counter);
  }

  /// Uniform integer in [0, n), n > 0. Modulo bias is irrelevant here
  /// (n is tiny compared to 2^64) and the result is platform-stable.
  std::uint64_t below(std::uint64_t counter, std::uint64_t n) const {
    return bits(counter) % n;
  }

 private:
  std::uint64_t key_;
};

}  // namespace aqua

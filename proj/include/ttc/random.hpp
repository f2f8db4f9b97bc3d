#pragma once

// Deterministic seeding. Every random draw in the library comes from a stream
// whose seed is a pure function of (master seed, structural coordinates), so
// results do not depend on thread scheduling or on the order in which
// independent units are processed.

#include <concepts>
#include <cstdint>
#include <limits>
#include <string_view>

namespace ttc {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// 64-bit FNV-1a. Stable across platforms, unlike std::hash.
constexpr std::uint64_t fnv1a(std::string_view bytes,
                              std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace detail {
constexpr std::uint64_t fold(std::uint64_t acc, std::integral auto v) noexcept {
  return mix64(acc ^ mix64(static_cast<std::uint64_t>(v)));
}
constexpr std::uint64_t fold(std::uint64_t acc, std::string_view v) noexcept {
  return mix64(acc ^ fnv1a(v));
}
}  // namespace detail

/// Derive a child seed from a parent seed and any mix of integer / string
/// coordinates. Floating-point coordinates are rejected at compile time.
template <class... Parts>
constexpr std::uint64_t derive_seed(std::uint64_t seed, const Parts&... parts) noexcept {
  std::uint64_t acc = mix64(seed);
  ((acc = detail::fold(acc, parts)), ...);
  return acc;
}

/// Small counter-based generator (splitmix64). Satisfies
/// std::uniform_random_bit_generator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) built from the top 53 bits. Spelled out
  /// because std::uniform_real_distribution is implementation-defined and
  /// we promise bit-identical runs across standard libraries.
  constexpr double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  constexpr double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform();
  }

 private:
  std::uint64_t state_;
};

}  // namespace ttc

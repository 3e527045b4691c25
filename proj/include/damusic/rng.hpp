#pragma once

// Reproducible random streams.
//
// The generator is xoshiro256** (Blackman & Vigna) seeded through SplitMix64.
// Uniform doubles take the top 53 bits; normals use the Box-Muller transform.
// None of this depends on <random> distributions, whose output is
// implementation-defined, so a seed yields the same stream on every platform.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>

namespace damusic {

inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) noexcept {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  /// Independent child stream keyed by (seed, key). Used for per-sample and
  /// per-trial sub-seeds so that sample l never depends on samples < l.
  static Rng derive(std::uint64_t seed, std::uint64_t key) noexcept {
    std::uint64_t sm = seed ^ (0xD1B54A32D192ED03ULL * (key + 1));
    const std::uint64_t a = splitmix64(sm);
    const std::uint64_t b = splitmix64(sm);
    return Rng(a ^ (b << 1));
  }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on the open interval (0, 1).
  double uniform_open() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform on the open interval (lo, hi).
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform_open(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept {
    // Lemire's multiply-shift with rejection; exact for every n.
    std::uint64_t x = next_u64();
    __uint128_t mul = static_cast<__uint128_t>(x) * n;
    auto low = static_cast<std::uint64_t>(mul);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        x = next_u64();
        mul = static_cast<__uint128_t>(x) * n;
        low = static_cast<std::uint64_t>(mul);
      }
    }
    return static_cast<std::uint64_t>(mul >> 64);
  }

  /// Pair of independent standard normals.
  std::array<double, 2> normal_pair() noexcept {
    const double u1 = uniform_open();
    const double u2 = uniform_open();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(phi), r * std::sin(phi)};
  }

  double normal() noexcept { return normal_pair()[0]; }

  /// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
  std::complex<double> complex_normal(double variance = 1.0) noexcept {
    const auto [re, im] = normal_pair();
    const double scale = std::sqrt(variance / 2.0);
    return {scale * re, scale * im};
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

  std::array<std::uint64_t, 4> s_{};
};

}  // namespace damusic

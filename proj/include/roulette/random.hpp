#pragma once

// Random streams and the handful of variate generators the samplers need.
//
// The standard <random> distributions are implementation-defined, so chains
// would not reproduce across standard libraries. Only the engine
// (std::mt19937_64, whose output sequence is fixed by the standard) is taken
// from <random>; the transforms below are written out so that a given seed
// yields the same variates everywhere, up to last-ulp differences in libm.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string_view>

namespace roulette {

using Rng = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a over the label bytes.
inline constexpr std::uint64_t hash_label(std::string_view label) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Seed of the named substream (label, index) under `root`. Substreams are
// addressed by name, so adding consumers never shifts anyone else's draws.
inline constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view label,
                                           std::uint64_t index = 0) noexcept {
  return splitmix64(splitmix64(root ^ hash_label(label)) + splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_stream(std::uint64_t root, std::string_view label, std::uint64_t index = 0) {
  return Rng(derive_seed(root, label, index));
}

// Uniform on the open interval (0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

// Uniform integer in [0, n) by multiply-shift.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

inline int random_spin(Rng& rng) { return (rng() >> 63) ? 1 : -1; }

// Box-Muller, one variate per call.
inline double standard_normal(Rng& rng) {
  const double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Exponential with unit rate.
inline double standard_exponential(Rng& rng) { return -std::log(uniform01(rng)); }

// Poisson by sequential inversion; intended for the small means used as
// truncation-index distributions.
inline std::uint64_t poisson(Rng& rng, double mean) {
  const double u = uniform01(rng);
  double p = std::exp(-mean);
  double cdf = p;
  std::uint64_t k = 0;
  while (u > cdf && p > 0.0) {
    ++k;
    p *= mean / static_cast<double>(k);
    cdf += p;
  }
  return k;
}

// Number of continuations before the first stop when each continuation has
// probability p: P(k) = (1 - p) p^k.
inline std::uint64_t geometric_count(Rng& rng, double p) {
  if (p <= 0.0) return 0;
  const double k = std::floor(std::log(uniform01(rng)) / std::log(p));
  if (!(k < 9.0e18)) return std::numeric_limits<std::uint64_t>::max();
  return static_cast<std::uint64_t>(k);
}

}  // namespace roulette

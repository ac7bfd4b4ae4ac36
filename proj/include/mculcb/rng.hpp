#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace mculcb {

using Rng = std::mt19937_64;

/// Uniform draw in the open interval (0, 1) with 53 bits of resolution.
inline double uniform_open(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// One fair Bernoulli draw.
inline bool fair_coin(Rng& rng) { return (rng() >> 63) != 0; }

/// Standard normal draw (Marsaglia polar method, no cached second value).
inline double gaussian(Rng& rng) {
  for (;;) {
    const double u = 2.0 * uniform_open(rng) - 1.0;
    const double v = 2.0 * uniform_open(rng) - 1.0;
    const double s = u * u + v * v;
    if (s < 1.0 && s > 0.0) {
      return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stable seed for one (algorithm, budget, repetition) cell of an experiment.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view name,
                                 std::uint64_t n, std::uint64_t rep) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (const char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  std::uint64_t s = splitmix64(base ^ h);
  s = splitmix64(s ^ n);
  return splitmix64(s ^ (rep * 0xd1342543de82ef95ULL));
}

}  // namespace mculcb

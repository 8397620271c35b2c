#pragma once

#include <cmath>
#include <cstdint>

namespace dapinn {

/// splitmix64; used both as a stream generator and to derive child seeds.
struct Rng {
  std::uint64_t state;

  explicit Rng(std::uint64_t seed) : state(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1). Identical bit pattern on every platform.
  double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller (one value per call, no cached state).
  double normal() {
    double u1 = uniform01();
    while (u1 == 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }
};

/// Child seed for a named purpose, so independent draws never share a stream.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt) {
  Rng r(master ^ (0x9e3779b97f4a7c15ull * (salt + 1)));
  return r.next_u64();
}

}  // namespace dapinn

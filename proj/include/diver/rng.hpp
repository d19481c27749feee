#pragma once
#include <cmath>
#include <cstdint>

namespace diver {

// Deterministic RNG used everywhere instead of <random> distributions, so
// results are pinned by this code alone and identical run-to-run.
// Core generator is splitmix64; normals come from a cached Box-Muller pair.
struct Rng {
  uint64_t state = 0;
  bool has_cached_gauss = false;
  double cached_gauss = 0.0;

  Rng() = default;
  explicit Rng(uint64_t seed) : state(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1), 53-bit resolution
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // uniform integer in [0, n); modulo bias is irrelevant at our scales
  int next_int(int n) { return int(next_u64() % uint64_t(n)); }

  double gauss() {
    if (has_cached_gauss) {
      has_cached_gauss = false;
      return cached_gauss;
    }
    double u1 = next_double();
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log1p(-u1));  // log(1-u1), safe at u1=0
    double a = 2.0 * M_PI * u2;
    cached_gauss = r * std::sin(a);
    has_cached_gauss = true;
    return r * std::cos(a);
  }
};

// Seed splitting for fan-out (scene i, eval stream, ...): child seeds are
// derived, never consumed from the parent sequence, so adding a consumer
// does not shift anyone else's stream.
inline uint64_t derive_seed(uint64_t base, uint64_t stream) {
  uint64_t z = base + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace diver

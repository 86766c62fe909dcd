#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace nelf {

// mt19937_64 with hand-rolled float draws so that streams are identical
// across standard libraries (std::*_distribution is implementation-defined).
class Rng {
public:
  explicit Rng(uint64_t seed) : gen_(seed), seed_hash_(next_mix(seed)) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  uint64_t uniform_index(uint64_t n) {
    // Rejection-free modulo is fine here; n is tiny relative to 2^64.
    return gen_() % n;
  }

  // Standard normal via Box-Muller (deterministic, no cached spare).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Independent child stream; used to keep per-frame synthesis deterministic
  // regardless of evaluation order.
  Rng child(uint64_t index) {
    uint64_t s = next_mix(seed_hash_ ^ (0x9e3779b97f4a7c15ull * (index + 1)));
    return Rng(s);
  }

  static Rng with_tag(uint64_t seed, uint64_t tag) {
    return Rng(next_mix(seed ^ (0xbf58476d1ce4e5b9ull * (tag + 1))));
  }

private:
  static uint64_t next_mix(uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::mt19937_64 gen_;
  uint64_t seed_hash_;
};

}  // namespace nelf

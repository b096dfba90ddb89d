#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

#include "grtfloc/common.hpp"

namespace grtfloc {

inline uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives a child seed from a base seed and a list of salts. Used to give
// every source / scene / noise draw its own stream so experiments replay
// identically regardless of evaluation order or worker count.
inline uint64_t mix_seed(uint64_t base, std::initializer_list<uint64_t> salts) {
  uint64_t h = mix64(base + 0x9e3779b97f4a7c15ULL);
  for (uint64_t v : salts) {
    h = mix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
  }
  return h;
}

// splitmix64 generator with Box-Muller gaussians. The sequence is pinned by
// this implementation (no reliance on std::normal_distribution, whose output
// is implementation-defined), so seeded runs are reproducible bit-for-bit.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  // [0, 1)
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite
    double u1 = 1.0 - uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = kTwoPi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // circularly-symmetric complex gaussian, unit variance
  cplx normal_complex() {
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    double re = normal();
    double im = normal();
    return {re * inv_sqrt2, im * inv_sqrt2};
  }

 private:
  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace grtfloc

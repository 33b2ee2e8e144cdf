#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "promptopt/types.hpp"

namespace promptopt {

// Seeded RNG that avoids std::*_distribution so that generated streams are
// pinned by the standard-specified mt19937_64 engine, not by the standard
// library's distribution implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  // Standard normal via Box-Muller. One spare value is cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  Vector gaussian_vector(int d) {
    Vector v(d);
    for (int i = 0; i < d; ++i) v(i) = gaussian();
    return v;
  }

  // Uniformly distributed point on the unit sphere in R^d.
  Vector unit_vector(int d) {
    Vector v = gaussian_vector(d);
    double n = v.norm();
    while (n == 0.0) {
      v = gaussian_vector(d);
      n = v.norm();
    }
    return v / n;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Cheap stream splitter so that sub-generators seeded from one run seed do
// not overlap trivially (splitmix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace promptopt

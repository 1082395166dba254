#pragma once

// Deterministic random numbers with a documented, stable child-seed rule.
//
// Child seeds are derived as
//   s0 = mix(master ^ (0x9E3779B97F4A7C15 * (stream + 1)))
//   child = mix(s0 + 0xBF58476D1CE4E5B9 * (index + 1))
// where mix is the splitmix64 finalizer. Streams separate independent uses
// (sampling, particle noise, field noise, sweep points); the index runs over
// realizations. The rule is pure integer arithmetic and never changes.

#include <cstdint>
#include <random>

#include "flocklab/core.hpp"

namespace flocklab {

inline std::uint64_t splitmix64_mix(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

enum class RngStream : std::uint64_t {
  initial_conditions = 1,
  particle_noise = 2,
  field_noise = 3,
  sweep = 4,
  bench = 5,
};

inline std::uint64_t child_seed(std::uint64_t master, RngStream stream,
                                std::uint64_t index) {
  std::uint64_t s =
      splitmix64_mix(master ^ (0x9E3779B97F4A7C15ULL *
                               (static_cast<std::uint64_t>(stream) + 1)));
  return splitmix64_mix(s + 0xBF58476D1CE4E5B9ULL * (index + 1));
}

// mt19937_64 with hand-rolled uniform/normal draws so that a given seed
// yields the same stream regardless of standard-library internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t raw() { return eng_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform01() { return (eng_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // Standard normal via Box-Muller; the spare draw is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace flocklab

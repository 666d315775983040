#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace kbound {

// The standard distributions are not specified bit-for-bit, so seeded results would differ
// between standard libraries. These draw straight from the engine instead.

/// Uniform in [0, 1) with 53 random bits.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal deviates by the Box-Muller transform, two per pair of uniforms.
class NormalSource {
 public:
  explicit NormalSource(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - unit_uniform(rng_);  // (0, 1]
    const double u2 = unit_uniform(rng_);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace kbound

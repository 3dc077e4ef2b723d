#pragma once

#include <cmath>
#include <cstdint>

namespace levyref {

// splitmix64 finalizer: bijective 64-bit mix with full avalanche.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Splittable generator: stream(seed, i) yields an independent sequence per
// path index, so estimates do not depend on how paths are scheduled. The
// normal variate uses Box-Muller directly instead of std::normal_distribution
// to keep sequences identical across standard libraries (golden fixtures are
// pinned against them).
class Rng {
 public:
  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    Rng r;
    r.state_ = mix64(seed ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
    return r;
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Exponential with the given rate; log1p keeps the draw in (0, inf).
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double r = std::sqrt(-2.0 * std::log(1.0 - uniform()));
    double a = 6.28318530717958647692 * uniform();
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t state_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

} // namespace levyref

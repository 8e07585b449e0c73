#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace varsr {

// Deterministic sampling helpers. Draws go through explicit transforms
// (fixed-point uniform, Box-Muller, CDF inversion) so a given engine stream
// always produces the same values, independent of standard-library
// distribution internals.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  // uniform in [0, 1)
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // standard normal via Box-Muller; pairs are generated together
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    cached_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
  }

  // index drawn from the given (normalized) probabilities by CDF inversion
  int categorical(std::span<const double> probs) {
    const double u = uniform01();
    double cum = 0.0;
    int last_positive = -1;
    for (size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] <= 0.0) continue;
      last_positive = static_cast<int>(i);
      cum += probs[i];
      if (u < cum) return last_positive;
    }
    return last_positive;  // guard against cumulative rounding at u ~ 1
  }

  uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// splitmix64 two-level mix: independent streams per (run, epoch, sample).
inline uint64_t derive_seed(uint64_t master, uint64_t a, uint64_t b = 0) {
  auto mix = [](uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return mix(mix(master ^ mix(a)) ^ mix(b + 0x517cc1b727220a95ULL));
}

}  // namespace varsr

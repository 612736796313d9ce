#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "reproguard/error.hpp"
#include "reproguard/quantizer.hpp"

namespace reproguard {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// The counter-th output of a splitmix64 stream seeded with `seed`; random
// access, no state.
constexpr std::uint64_t splitmix64_at(std::uint64_t seed, std::uint64_t counter) {
  return splitmix64_mix(seed + (counter + 1) * kGoldenGamma);
}

// Uniform double in [0, 1) from the top 53 bits.
constexpr double unit_double(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1p-53; }

// Sequential splitmix64 generator for seeded data synthesis.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    state_ += kGoldenGamma;
    return splitmix64_mix(state_);
  }
  double uniform() { return unit_double(next()); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller; one draw per call.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::uint64_t state_;
};

enum class PerturbDist : std::uint8_t { None, Uniform, Adversarial };

inline PerturbDist parse_perturb_dist(const std::string& s) {
  if (s == "none") return PerturbDist::None;
  if (s == "uniform") return PerturbDist::Uniform;
  if (s == "adversarial") return PerturbDist::Adversarial;
  fail(ErrorKind::InvalidInput, "unknown perturbation distribution '" + s + "'");
}

inline const char* to_string(PerturbDist d) {
  switch (d) {
    case PerturbDist::None: return "none";
    case PerturbDist::Uniform: return "uniform";
    case PerturbDist::Adversarial: return "adversarial";
  }
  return "?";
}

// Measured maximum cross-GPU errors used as defaults.
inline constexpr double kPccGpuError = 5e-7;
inline constexpr double kImageGpuError = 8e-6;

inline double perturb_preset(const std::string& name) {
  if (name == "pcc-gpu") return kPccGpuError;
  if (name == "image-gpu") return kImageGpuError;
  fail(ErrorKind::InvalidInput, "unknown perturbation preset '" + name + "'");
}

struct Perturbation {
  double e_max = 0.0;
  PerturbDist dist = PerturbDist::None;
  std::uint64_t seed = 0;
  std::uint64_t counter = 0;
};

// Value the simulated foreign platform would have produced instead of v.
inline double perturb(const Perturbation& p, double v, const QuantGrid& grid) {
  if (!std::isfinite(v)) fail(ErrorKind::InvalidInput, "non-finite value");
  if (p.e_max == 0.0) return v;
  switch (p.dist) {
    case PerturbDist::None: return v;
    case PerturbDist::Uniform: {
      const double u = unit_double(splitmix64_at(p.seed, p.counter));
      return v + (2.0 * u - 1.0) * p.e_max;
    }
    case PerturbDist::Adversarial: {
      double probe = v;
      if (!grid.is_uniform()) probe = std::clamp(probe, grid.table().front(), grid.table().back());
      const double b = grid.round_b(probe);
      // On a boundary the value belongs to the upper bin, so stepping down
      // is what flips it.
      const double shifted = (b > v) ? v + p.e_max : v - p.e_max;
      return grid.clip(shifted);
    }
  }
  return v;
}

// Decoder-side injector: one counter step per critical value.
class PlatformSim {
 public:
  explicit PlatformSim(Perturbation p) : p_(p) {}
  double operator()(double v, const QuantGrid& grid) {
    const double out = perturb(p_, v, grid);
    ++p_.counter;
    return out;
  }
  const Perturbation& state() const noexcept { return p_; }

 private:
  Perturbation p_;
};

}  // namespace reproguard

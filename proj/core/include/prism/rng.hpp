#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace prism {

using Rng = std::mt19937_64;

/// SplitMix64 step; mixes `state` and returns the next 64-bit output.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic substream seed from a master seed and a path of ids,
/// e.g. derive_seed(master, {iteration, observation_index}). Streams with
/// distinct paths are statistically independent.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = master ^ 0xa0761d6478bd642fULL;
  (void)splitmix64(s);
  for (std::uint64_t id : path) {
    s ^= splitmix64(s) + id;
    (void)splitmix64(s);
  }
  return splitmix64(s);
}

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> path = {}) {
  return Rng(derive_seed(master, path));
}

/// Uniform double in the open interval (0,1); never returns 0 or 1, so it is
/// always safe under log().
inline double uniform_open01(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal sampler (polar method with a cached spare).
/// Each instance owns its state; do not share across threads.
class NormalSampler {
 public:
  double operator()(Rng& rng) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform_open01(rng) - 1.0;
      v = 2.0 * uniform_open01(rng) - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  void reset() { has_spare_ = false; }

 private:
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// One Gamma(shape, 1) variate via Marsaglia-Tsang; shape < 1 is boosted
/// through Gamma(shape + 1) * U^(1/shape), shape == 1 is an exponential.
inline double gamma_draw(double shape, Rng& rng, NormalSampler& normal) {
  if (shape == 1.0) return -std::log(uniform_open01(rng));
  if (shape < 1.0) {
    const double g = gamma_draw(shape + 1.0, rng, normal);
    return g * std::pow(uniform_open01(rng), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_open01(rng);
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

}  // namespace prism

#pragma once

// Seeded random streams.  Every simulation owns one Rng; per-component
// streams are derived from a 64-bit master seed with derive_stream_seed so
// adding a consumer never perturbs another's draws.

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace evpix {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace detail

// Stream seed = splitmix64(splitmix64(master ^ fnv1a64(label)) ^ index).
// Documented contract: stable across versions, labels are ASCII tags.
inline std::uint64_t derive_stream_seed(std::uint64_t master, std::string_view label,
                                        std::uint64_t index = 0) {
  return detail::splitmix64(detail::splitmix64(master ^ detail::fnv1a64(label)) ^ index);
}

class Rng {
public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t raw() { return eng_(); }

  // uniform on [0, 1)
  double uniform() { return (eng_() >> 11) * 0x1.0p-53; }

  // uniform on (0, 1]
  double uniform_pos() { return ((eng_() >> 11) + 1) * 0x1.0p-53; }

  // standard normal, Box-Muller with cached spare
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform_pos();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925287 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Poisson draw; sequential inversion below rate 30, PTRS rejection above.
  long poisson(double rate) {
    if (!(rate >= 0.0)) throw std::invalid_argument("poisson: rate must be >= 0");
    if (rate == 0.0) return 0;
    if (rate < 30.0) return poisson_inversion(rate);
    return poisson_ptrs(rate);
  }

private:
  long poisson_inversion(double rate) {
    double p = std::exp(-rate);
    double f = p;
    double u = uniform();
    long k = 0;
    while (u > f) {
      ++k;
      p *= rate / static_cast<double>(k);
      f += p;
      if (k > 2000) break;  // cumulative roundoff guard; P ~ 0 here
    }
    return k;
  }

  // Hoermann's PTRS transformed-rejection sampler.
  long poisson_ptrs(double mu) {
    const double b = 0.931 + 2.53 * std::sqrt(mu);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    const double log_mu = std::log(mu);
    for (;;) {
      double u = uniform() - 0.5;
      double v = uniform();
      double us = 0.5 - std::abs(u);
      double kf = std::floor((2.0 * a / us + b) * u + mu + 0.43);
      if (us >= 0.07 && v <= v_r) return static_cast<long>(kf);
      if (kf < 0.0 || (us < 0.013 && v > us)) continue;
      double k = kf;
      if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
          k * log_mu - mu - std::lgamma(k + 1.0))
        return static_cast<long>(kf);
    }
  }

  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace evpix

#pragma once

// Photon-to-voltage front end: Poisson photoelectrons through a log
// amplifier with Johnson noise, its large-illuminance normal limit, the
// normalization onto the four-parameter model, and the exact-discretization
// OU path generator.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "evpix/rng.hpp"

namespace evpix {

struct FrontEndParams {
  double beta1 = 1.0;   // amplifier gain (volts)
  double beta2 = 1.0;   // amplifier knee (electrons)
  double beta3 = 0.0;   // offset (volts)
  double sigma = 0.0;   // Johnson-noise std (volts)
  double xi1 = 1.0;     // radiance-to-electrons gain
  double xi2 = 0.0;     // dark-current electrons
  double radiance = 0.0;

  double electron_rate() const { return xi1 * radiance + xi2; }

  void validate() const {
    if (!(beta1 > 0.0)) throw std::invalid_argument("FrontEndParams: beta1 must be > 0");
    if (!(beta2 > 0.0)) throw std::invalid_argument("FrontEndParams: beta2 must be > 0");
    if (!(sigma >= 0.0)) throw std::invalid_argument("FrontEndParams: sigma must be >= 0");
    if (!(xi1 >= 0.0)) throw std::invalid_argument("FrontEndParams: xi1 must be >= 0");
    if (!(xi2 >= 0.0)) throw std::invalid_argument("FrontEndParams: xi2 must be >= 0");
    if (!(radiance >= 0.0)) throw std::invalid_argument("FrontEndParams: radiance must be >= 0");
    if (!(electron_rate() > 0.0))
      throw std::invalid_argument("FrontEndParams: xi1*L + xi2 must be > 0");
  }
};

struct GaussianVoltage {
  double mu_v = 0.0;
  double sigma_v = 1.0;

  void validate() const {
    if (!(sigma_v > 0.0)) throw std::invalid_argument("GaussianVoltage: sigma_v must be > 0");
  }
};

struct NormalizedThresholds {
  double theta_minus = 1.0;  // dimensionless, lower (off) threshold
  double theta_plus = 1.0;   // dimensionless, upper (on) threshold
};

// One draw of the post-amplifier voltage
//   V = beta1 log(K/beta2 + 1) + beta3 + sigma Z,  K ~ Poisson(xi1 L + xi2).
inline double sample_post_amp_voltage(const FrontEndParams& p, Rng& rng) {
  const double k = static_cast<double>(rng.poisson(p.electron_rate()));
  return p.beta1 * std::log1p(k / p.beta2) + p.beta3 + p.sigma * rng.normal();
}

// Large-L normal limit of V.
inline GaussianVoltage asymptotic_params(const FrontEndParams& p) {
  const double h = p.electron_rate();
  GaussianVoltage g;
  g.mu_v = p.beta1 * std::log1p(h / p.beta2) + p.beta3;
  const double hb = h + p.beta2;
  g.sigma_v = std::sqrt(p.beta1 * p.beta1 * h / (hb * hb) + p.sigma * p.sigma);
  return g;
}

// Map voltage-domain thresholds onto the dimensionless model:
// theta~ = theta / (omega sigma_V).
inline NormalizedThresholds normalize(const GaussianVoltage& g, double omega,
                                      double theta_plus, double theta_minus) {
  g.validate();
  if (!(omega > 0.0)) throw std::invalid_argument("normalize: omega must be > 0");
  if (!(theta_plus > 0.0) || !(theta_minus > 0.0))
    throw std::invalid_argument("normalize: thresholds must be > 0");
  const double s = omega * g.sigma_v;
  return {theta_minus / s, theta_plus / s};
}

inline double ou_affine(double mu, double scale, double x) { return mu + scale * x; }

// Unit-diffusion OU path dX = -omega X dt + dW sampled at spacing dt with the
// exact one-step transition X' | X = x ~ N(x e^{-omega dt}, (1-e^{-2 omega dt})/(2 omega)).
// Returns n_steps+1 values starting at x0.
inline std::vector<double> simulate_standard_ou_path(double omega, double x0, double dt,
                                                     std::size_t n_steps, Rng& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("simulate_standard_ou_path: dt must be > 0");
  if (!(omega > 0.0)) throw std::invalid_argument("simulate_standard_ou_path: omega must be > 0");
  const double a = std::exp(-omega * dt);
  const double s = std::sqrt((1.0 - a * a) / (2.0 * omega));
  std::vector<double> path(n_steps + 1);
  path[0] = x0;
  double x = x0;
  for (std::size_t k = 1; k <= n_steps; ++k) {
    x = a * x + s * rng.normal();
    path[k] = x;
  }
  return path;
}

// Voltage-domain OU path; realized as the affine image of the standardized
// path so the location-scale identity holds bit-for-bit.
inline std::vector<double> simulate_ou_path(double mu_v, double sigma_v, double omega,
                                            double v0, double dt, std::size_t n_steps,
                                            Rng& rng) {
  const double scale = omega * sigma_v;
  if (scale == 0.0) {
    // noiseless limit: deterministic exponential relaxation toward mu_v
    std::vector<double> path(n_steps + 1);
    const double a = std::exp(-omega * dt);
    double v = v0;
    path[0] = v0;
    for (std::size_t k = 1; k <= n_steps; ++k) {
      v = mu_v + (v - mu_v) * a;
      path[k] = v;
    }
    return path;
  }
  const double x0 = (v0 - mu_v) / scale;
  std::vector<double> path = simulate_standard_ou_path(omega, x0, dt, n_steps, rng);
  for (double& x : path) x = ou_affine(mu_v, scale, x);
  return path;
}

}  // namespace evpix

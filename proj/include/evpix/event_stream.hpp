#pragma once

// The canonical event generator: the reference-voltage jump chain, the full
// event stream (timestamps + polarities), the one-step transition density,
// conditional statistics given the current reference voltage, and Monte
// Carlo estimation of the stationary stream statistics.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "evpix/kde.hpp"
#include "evpix/ou_exit.hpp"
#include "evpix/rng.hpp"
#include "evpix/special_functions.hpp"

namespace evpix {

// The refractory-period update Z_n = alpha X + sigma_alpha xi admits two
// variance conventions: the published algorithms use (1 - alpha^2)/2
// (PaperLiteral); the exact unit-diffusion OU transition over rho seconds
// gives (1 - alpha^2)/(2 omega) (SdeConsistent).  PaperLiteral reproduces
// the published statistics and is the default.
enum class SigmaAlphaMode { PaperLiteral, SdeConsistent };

struct ModelParams {
  double omega = 1.0;        // filter cutoff / mean-reversion rate (rad/s)
  double rho = 0.0;          // refractory period (s)
  double theta_minus = 1.0;  // normalized off threshold (dimensionless)
  double theta_plus = 1.0;   // normalized on threshold (dimensionless)
  SigmaAlphaMode sigma_alpha_mode = SigmaAlphaMode::PaperLiteral;

  double alpha() const { return std::exp(-omega * rho); }

  double sigma_alpha() const {
    const double a = alpha();
    const double v = (1.0 - a * a) / 2.0;
    return sigma_alpha_mode == SigmaAlphaMode::PaperLiteral
               ? std::sqrt(v)
               : std::sqrt(v / omega);
  }

  void validate() const {
    if (!(omega > 0.0)) throw std::invalid_argument("ModelParams: omega must be > 0");
    if (!(rho >= 0.0)) throw std::invalid_argument("ModelParams: rho must be >= 0");
    if (!(theta_minus > 0.0))
      throw std::invalid_argument("ModelParams: theta_minus must be > 0");
    if (!(theta_plus > 0.0))
      throw std::invalid_argument("ModelParams: theta_plus must be > 0");
  }

  ExitProblem exit_problem(double z) const {
    return {omega, z - theta_minus, z + theta_plus, z};
  }
};

enum class Polarity { Off = 0, On = 1 };

inline const char* to_string(Polarity p) { return p == Polarity::On ? "on" : "off"; }

struct Event {
  std::uint64_t index = 0;  // n, 1-based
  double timestamp = 0.0;   // T_n (s)
  Polarity polarity = Polarity::Off;
  double isi = 0.0;           // T_n - T_{n-1} (s)
  double z_before = 0.0;      // Z_{n-1}
  double z_after = 0.0;       // Z_n
  double exit_position = 0.0; // X_{T_n}
  double noise = 0.0;         // the recorded standard-normal draw xi_n
};

struct EventStream {
  ModelParams params;
  std::uint64_t seed = 0;
  std::vector<Event> events;
};

// the post-refractory reference update
inline double chain_update(double alpha, double sigma_alpha, double exit_position,
                           double xi) {
  return alpha * exit_position + sigma_alpha * xi;
}

// Algorithm-1 chain: per step a Bernoulli exit side from the closed form and
// the Gaussian refractory update; no exit times are sampled.  Returns the
// n chain values Z_1..Z_n (start excluded).
inline std::vector<double> simulate_reference_chain(const ModelParams& p, double start,
                                                    std::size_t n, Rng& rng) {
  p.validate();
  if (n < 1) throw std::invalid_argument("simulate_reference_chain: n must be >= 1");
  const double a = p.alpha();
  const double sa = p.sigma_alpha();
  std::vector<double> zs(n);
  double z = start;
  for (std::size_t i = 0; i < n; ++i) {
    const double p_off = exit_side_probs(p.exit_problem(z)).lower;
    const double x = rng.uniform() < p_off ? z - p.theta_minus : z + p.theta_plus;
    z = chain_update(a, sa, x, rng.normal());
    zs[i] = z;
  }
  return zs;
}

struct StreamOptions {
  double cache_spacing = 0.01;  // z-lattice spacing; 0 = exactness mode
  ExitCdfOptions cdf;
};

// Algorithm-2 stream: joint (tau, exit side) via the path-free sampler with
// per-z cached exit-time CDFs, then the refractory transform
// (ISI, Z) = (tau + rho, alpha X + sigma_alpha xi).
inline EventStream simulate_event_stream(const ModelParams& p, double start,
                                         std::size_t n, Rng& rng,
                                         const StreamOptions& opt = {}) {
  p.validate();
  if (n < 1) throw std::invalid_argument("simulate_event_stream: n must be >= 1");
  EventStream out;
  out.params = p;
  out.events.reserve(n);
  ExitCdfCache cache(p.omega, p.theta_minus, p.theta_plus, opt.cache_spacing, opt.cdf);
  const double a = p.alpha();
  const double sa = p.sigma_alpha();
  double z = start;
  double t = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    // exit side from the closed form at the exact z; the lattice
    // approximation only enters the exit-time law
    const double p_off = exit_side_probs(p.exit_problem(z)).lower;
    const bool lower = rng.uniform() < p_off;
    auto cdf = cache.get(z);
    const double tau =
        invert_exit_time(*cdf, lower ? ExitSide::Lower : ExitSide::Upper, rng.uniform());
    const double x = lower ? z - p.theta_minus : z + p.theta_plus;
    const double xi = rng.normal();
    Event ev;
    ev.index = i;
    ev.isi = tau + p.rho;
    t += ev.isi;
    ev.timestamp = t;
    ev.polarity = lower ? Polarity::Off : Polarity::On;
    ev.z_before = z;
    ev.exit_position = x;
    ev.noise = xi;
    z = chain_update(a, sa, x, xi);
    ev.z_after = z;
    out.events.push_back(ev);
  }
  return out;
}

// Lemma-form one-step transition density of Z_n given Z_{n-1} = z: a
// two-component Gaussian mixture weighted by the exit-side probabilities.
inline double one_step_transition_density(const ModelParams& p, double z, double z_prime) {
  p.validate();
  const ExitSideProbs probs = exit_side_probs(p.exit_problem(z));
  const double a = p.alpha();
  const double sa = p.sigma_alpha();
  const double ml = a * (z - p.theta_minus);
  const double mu = a * (z + p.theta_plus);
  return probs.lower * norm_pdf((z_prime - ml) / sa) / sa +
         probs.upper * norm_pdf((z_prime - mu) / sa) / sa;
}

inline ExitSideProbs conditional_event_probs(const ModelParams& p, double z) {
  // off events exit through the lower threshold
  return exit_side_probs(p.exit_problem(z));
}

inline double conditional_expected_isi(const ModelParams& p, double z,
                                       const EvalOptions& opt = {}) {
  return p.rho + expected_exit_time(p.exit_problem(z), opt);
}

inline double conditional_expected_z(const ModelParams& p, double z) {
  const ExitSideProbs probs = exit_side_probs(p.exit_problem(z));
  return p.alpha() * (z - p.theta_minus * probs.lower + p.theta_plus * probs.upper);
}

// Kernel density estimates of the m-step transition densities from a fixed
// start: `replicas` independent Algorithm-1 chains, one KDE per requested m.
// Replicas are distributed over a worker pool; per-replica seeds derive from
// the base seed so the result is independent of the thread count.
struct MStepDensities {
  std::vector<std::size_t> m_values;
  std::vector<KdeCurve> curves;
};

inline MStepDensities m_step_density_kde(const ModelParams& p, double start,
                                         const std::vector<std::size_t>& m_list,
                                         std::size_t replicas, std::uint64_t seed,
                                         unsigned threads = 0) {
  p.validate();
  if (replicas < 1) throw std::invalid_argument("m_step_density_kde: replicas must be >= 1");
  if (m_list.empty()) throw std::invalid_argument("m_step_density_kde: empty m list");
  std::size_t m_max = 0;
  for (std::size_t m : m_list) m_max = std::max(m_max, m);

  std::vector<std::vector<double>> samples(m_list.size(),
                                           std::vector<double>(replicas, start));
  if (m_max > 0) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(replicas));
    const double a = p.alpha();
    const double sa = p.sigma_alpha();
    // visit the requested m's in increasing order within a single pass
    std::vector<std::size_t> order(m_list.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a_, std::size_t b_) { return m_list[a_] < m_list[b_]; });
    auto worker = [&](std::size_t r0, std::size_t r1) {
      for (std::size_t r = r0; r < r1; ++r) {
        Rng rng(derive_stream_seed(seed, "mstep-replica", r));
        double z = start;
        std::size_t step = 0;
        for (std::size_t idx : order) {
          const std::size_t target = m_list[idx];
          while (step < target) {
            const double p_off = exit_side_probs(p.exit_problem(z)).lower;
            const double x = rng.uniform() < p_off ? z - p.theta_minus : z + p.theta_plus;
            z = chain_update(a, sa, x, rng.normal());
            ++step;
          }
          samples[idx][r] = z;
        }
      }
    };
    std::vector<std::thread> pool;
    const std::size_t chunk = (replicas + threads - 1) / threads;
    for (unsigned th = 0; th < threads; ++th) {
      const std::size_t r0 = th * chunk;
      const std::size_t r1 = std::min(replicas, r0 + chunk);
      if (r0 >= r1) break;
      pool.emplace_back(worker, r0, r1);
    }
    for (auto& th : pool) th.join();
  }

  MStepDensities out;
  out.m_values = m_list;
  out.curves.reserve(m_list.size());
  for (std::size_t i = 0; i < m_list.size(); ++i) {
    const auto& s = samples[i];
    const bool degenerate = m_list[i] == 0;
    // m = 0 is a point mass; render it as a narrow Gaussian bump
    const double bw = degenerate ? std::max(1e-3, 1e-3 * std::abs(start)) : 0.0;
    out.curves.push_back(kde(s, bw));
  }
  return out;
}

struct StationaryStats {
  double pi_off = 0.0;
  double pi_on = 0.0;
  double mean_isi = 0.0;   // seconds
  double r_total = 0.0;    // events/s
  double r_on = 0.0;
  double r_off = 0.0;
};

// Proposition-1 estimators: run the Algorithm-1 chain, discard the burn-in,
// and average the conditional event probabilities and conditional expected
// ISI over the retained reference voltages.
inline StationaryStats stationary_stats(const ModelParams& p, std::size_t burn_in,
                                        std::size_t samples, Rng& rng,
                                        const EvalOptions& opt = {}) {
  p.validate();
  if (burn_in < 1000) throw std::invalid_argument("stationary_stats: burn_in must be >= 1e3");
  if (samples < 1) throw std::invalid_argument("stationary_stats: samples must be >= 1");
  const double a = p.alpha();
  const double sa = p.sigma_alpha();
  double z = 0.0;
  // burn-in from the origin
  for (std::size_t i = 0; i < burn_in; ++i) {
    const double p_off = exit_side_probs(p.exit_problem(z)).lower;
    const double x = rng.uniform() < p_off ? z - p.theta_minus : z + p.theta_plus;
    z = chain_update(a, sa, x, rng.normal());
  }
  double sum_on = 0.0;
  double sum_isi = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double p_off = exit_side_probs(p.exit_problem(z)).lower;
    sum_on += 1.0 - p_off;
    sum_isi += conditional_expected_isi(p, z, opt);
    const double x = rng.uniform() < p_off ? z - p.theta_minus : z + p.theta_plus;
    z = chain_update(a, sa, x, rng.normal());
  }
  StationaryStats st;
  st.pi_on = sum_on / static_cast<double>(samples);
  st.pi_off = 1.0 - st.pi_on;
  st.mean_isi = sum_isi / static_cast<double>(samples);
  st.r_total = 1.0 / st.mean_isi;
  st.r_on = st.pi_on * st.r_total;
  st.r_off = st.pi_off * st.r_total;
  return st;
}

struct PolarityTransitionMatrix {
  // row = previous polarity, column = next; indices via Polarity enum
  double p[2][2] = {{0.0, 0.0}, {0.0, 0.0}};

  double operator()(Polarity from, Polarity to) const {
    return p[static_cast<int>(from)][static_cast<int>(to)];
  }
};

inline PolarityTransitionMatrix polarity_transition_matrix(const EventStream& s) {
  if (s.events.size() < 2)
    throw std::invalid_argument("polarity_transition_matrix: need at least 2 events");
  std::size_t counts[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 1; i < s.events.size(); ++i) {
    const int from = static_cast<int>(s.events[i - 1].polarity);
    const int to = static_cast<int>(s.events[i].polarity);
    ++counts[from][to];
  }
  PolarityTransitionMatrix m;
  for (int r = 0; r < 2; ++r) {
    const double row = static_cast<double>(counts[r][0] + counts[r][1]);
    if (row > 0.0) {
      m.p[r][0] = static_cast<double>(counts[r][0]) / row;
      m.p[r][1] = static_cast<double>(counts[r][1]) / row;
    }
  }
  return m;
}

// --- serialization ---------------------------------------------------------

inline std::string format_params_comment(const ModelParams& p, std::uint64_t seed) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "omega_rad_s=%.17g rho_s=%.17g theta_minus=%.17g theta_plus=%.17g "
                "sigma_alpha_mode=%s seed=%llu",
                p.omega, p.rho, p.theta_minus, p.theta_plus,
                p.sigma_alpha_mode == SigmaAlphaMode::PaperLiteral ? "paper" : "sde",
                static_cast<unsigned long long>(seed));
  return buf;
}

// JSON-lines: a leading meta object, then one event per line.
inline void write_event_stream_jsonl(std::ostream& os, const EventStream& s) {
  const ModelParams& p = s.params;
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "{\"meta\":{\"omega_rad_s\":%.17g,\"rho_s\":%.17g,\"theta_minus\":%.17g,"
                "\"theta_plus\":%.17g,\"sigma_alpha_mode\":\"%s\",\"seed\":%llu}}\n",
                p.omega, p.rho, p.theta_minus, p.theta_plus,
                p.sigma_alpha_mode == SigmaAlphaMode::PaperLiteral ? "paper" : "sde",
                static_cast<unsigned long long>(s.seed));
  os << buf;
  for (const Event& e : s.events) {
    std::snprintf(buf, sizeof buf,
                  "{\"index\":%llu,\"timestamp_s\":%.17g,\"polarity\":\"%s\","
                  "\"isi_s\":%.17g,\"z_before\":%.17g,\"z_after\":%.17g,"
                  "\"exit_position\":%.17g}\n",
                  static_cast<unsigned long long>(e.index), e.timestamp,
                  to_string(e.polarity), e.isi, e.z_before, e.z_after, e.exit_position);
    os << buf;
  }
}

inline void write_event_stream_csv(std::ostream& os, const EventStream& s) {
  os << "# " << format_params_comment(s.params, s.seed) << "\n";
  os << "index,timestamp_s,polarity,isi_s,z_before,z_after,exit_position\n";
  char buf[384];
  for (const Event& e : s.events) {
    std::snprintf(buf, sizeof buf, "%llu,%.17g,%s,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<unsigned long long>(e.index), e.timestamp,
                  to_string(e.polarity), e.isi, e.z_before, e.z_after, e.exit_position);
    os << buf;
  }
}

}  // namespace evpix

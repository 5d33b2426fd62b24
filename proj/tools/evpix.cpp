// Command-line front end: deterministic, manifest-reproducible runs of the
// event-pixel simulator and its analysis tools.
//
// Exit codes: 0 success, 2 configuration/validation failure, 3 numerical
// failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "evpix/analysis.hpp"
#include "evpix/dynamics.hpp"
#include "evpix/event_stream.hpp"
#include "evpix/ou_exit.hpp"
#include "evpix/photovoltage.hpp"
#include "evpix/stats.hpp"
#include "evpix/version.hpp"

namespace fs = std::filesystem;
using namespace evpix;

namespace {

struct ModelFlags {
  double omega = 5.0;
  double rho = 0.002;
  double theta_minus = 0.0;
  double theta_plus = 0.0;
  // front-end route
  double beta1 = 1.0, beta2 = 1.0, beta3 = 0.0;
  double noise_sigma = 0.0;
  double xi1 = 1.0, xi2 = 0.0;
  double radiance = 0.0;
  double threshold_minus_volts = 0.0;
  double threshold_plus_volts = 0.0;
  std::string sigma_alpha_mode = "paper";

  CLI::Option* opt_theta_minus = nullptr;
  CLI::Option* opt_theta_plus = nullptr;
  CLI::Option* opt_volts_minus = nullptr;
  CLI::Option* opt_volts_plus = nullptr;
  CLI::Option* opt_radiance = nullptr;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--omega", omega, "filter cutoff / mean-reversion rate (rad/s)")
        ->capture_default_str();
    cmd->add_option("--rho", rho, "refractory period (s)")->capture_default_str();
    opt_theta_minus =
        cmd->add_option("--theta-minus", theta_minus,
                        "normalized off threshold (dimensionless)");
    opt_theta_plus = cmd->add_option("--theta-plus", theta_plus,
                                     "normalized on threshold (dimensionless)");
    cmd->add_option("--beta1", beta1, "amplifier gain (V)")->capture_default_str();
    cmd->add_option("--beta2", beta2, "amplifier knee (electrons)")->capture_default_str();
    cmd->add_option("--beta3", beta3, "offset (V)")->capture_default_str();
    cmd->add_option("--noise-sigma", noise_sigma, "Johnson-noise std (V)")
        ->capture_default_str();
    cmd->add_option("--xi1", xi1, "radiance-to-electrons gain")->capture_default_str();
    cmd->add_option("--xi2", xi2, "dark-current electrons")->capture_default_str();
    opt_radiance = cmd->add_option("--radiance", radiance, "scene radiance");
    opt_volts_minus = cmd->add_option("--threshold-minus-volts", threshold_minus_volts,
                                      "off threshold (V), normalized internally");
    opt_volts_plus = cmd->add_option("--threshold-plus-volts", threshold_plus_volts,
                                     "on threshold (V), normalized internally");
    cmd->add_option("--sigma-alpha-mode", sigma_alpha_mode,
                    "refractory-update variance convention: paper | sde")
        ->check(CLI::IsMember({"paper", "sde"}))
        ->capture_default_str();
  }

  ModelParams resolve() const {
    const bool normalized_route =
        opt_theta_minus->count() > 0 || opt_theta_plus->count() > 0;
    const bool frontend_route =
        opt_volts_minus->count() > 0 || opt_volts_plus->count() > 0 ||
        opt_radiance->count() > 0;
    if (normalized_route == frontend_route)
      throw std::invalid_argument(
          "provide exactly one of: (--theta-minus, --theta-plus) or "
          "(--radiance, --threshold-minus-volts, --threshold-plus-volts)");
    ModelParams p;
    p.omega = omega;
    p.rho = rho;
    p.sigma_alpha_mode = sigma_alpha_mode == "paper" ? SigmaAlphaMode::PaperLiteral
                                                     : SigmaAlphaMode::SdeConsistent;
    if (normalized_route) {
      if (opt_theta_minus->count() == 0 || opt_theta_plus->count() == 0)
        throw std::invalid_argument("both --theta-minus and --theta-plus are required");
      p.theta_minus = theta_minus;
      p.theta_plus = theta_plus;
    } else {
      if (opt_volts_minus->count() == 0 || opt_volts_plus->count() == 0)
        throw std::invalid_argument(
            "both --threshold-minus-volts and --threshold-plus-volts are required");
      FrontEndParams fe;
      fe.beta1 = beta1;
      fe.beta2 = beta2;
      fe.beta3 = beta3;
      fe.sigma = noise_sigma;
      fe.xi1 = xi1;
      fe.xi2 = xi2;
      fe.radiance = radiance;
      fe.validate();
      const GaussianVoltage g = asymptotic_params(fe);
      const NormalizedThresholds t =
          normalize(g, omega, threshold_plus_volts, threshold_minus_volts);
      p.theta_minus = t.theta_minus;
      p.theta_plus = t.theta_plus;
    }
    p.validate();
    return p;
  }
};

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << content;
}

void write_manifest(const fs::path& out_dir, CLI::App& app) {
  std::string cfg = "# evpix ";
  cfg += evpix::version;
  cfg += "\n";
  cfg += app.config_to_str(true, false);
  write_file(out_dir / "manifest.ini", cfg);
}

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

// ---- stream ----------------------------------------------------------------

struct StreamArgs {
  ModelFlags model;
  double start = 0.0;
  std::uint64_t n = 100000;
  std::uint64_t seed = 1;
  std::string out = "evpix_out";
  std::string format = "both";
  double cache_spacing = 0.01;
  bool exact_cache = false;
  std::size_t bins_per_decade = 10;
};

int run_stream(const StreamArgs& a, CLI::App& app) {
  const ModelParams p = a.model.resolve();
  const fs::path dir = prepare_out_dir(a.out);
  StreamOptions opt;
  opt.cache_spacing = a.exact_cache ? 0.0 : a.cache_spacing;
  Rng rng(derive_stream_seed(a.seed, "stream"));
  EventStream s = simulate_event_stream(p, a.start, a.n, rng, opt);
  s.seed = a.seed;

  if (a.format == "jsonl" || a.format == "both") {
    std::ofstream os(dir / "stream.jsonl", std::ios::binary);
    write_event_stream_jsonl(os, s);
  }
  if (a.format == "csv" || a.format == "both") {
    std::ofstream os(dir / "stream.csv", std::ios::binary);
    write_event_stream_csv(os, s);
  }
  const SummaryTable t = summarize(s);
  {
    std::ofstream os(dir / "summary.json", std::ios::binary);
    write_summary_json(os, t);
  }
  {
    std::ofstream os(dir / "summary.txt", std::ios::binary);
    write_summary_text(os, t);
  }
  {
    const IsiHistograms h = isi_histograms(s, a.bins_per_decade);
    std::ofstream os(dir / "isi_histograms.csv", std::ios::binary);
    write_isi_histograms_csv(os, h);
  }
  write_manifest(dir, app);
  write_summary_text(std::cout, t);
  return 0;
}

// ---- exit-stats ------------------------------------------------------------

struct ExitStatsArgs {
  double omega = 2.0;
  double lower = -0.5;
  double upper = 1.0;
  double x0 = 0.0;
  std::uint64_t n = 100000;
  double dt = 1e-3;
  std::uint64_t seed = 1;
  std::string out = "evpix_out";
  bool sampler_check = false;
  bool dump_samples = false;
  std::size_t pde_nx = 201;
  std::size_t pde_nt = 400;
};

int run_exit_stats(const ExitStatsArgs& a, CLI::App& app) {
  ExitProblem prob{a.omega, a.lower, a.upper, a.x0};
  prob.validate();
  const fs::path dir = prepare_out_dir(a.out);

  const ExitSideProbs probs = exit_side_probs(prob);
  const double e_tau = expected_exit_time(prob);
  const double e_pos = expected_exit_position(prob);

  const ExitTimeCdf cdf = solve_exit_cdf(prob);
  Rng rng_pf(derive_stream_seed(a.seed, "exit-pathfree"));
  Rng rng_po(derive_stream_seed(a.seed, "exit-oracle"));

  std::vector<double> t_pf(a.n), t_po;
  std::size_t low_pf = 0, low_po = 0;
  for (auto& t : t_pf) {
    const auto s = sample_exit_pathfree(prob, cdf, rng_pf);
    t = s.time;
    if (s.side == ExitSide::Lower) ++low_pf;
  }
  double mean_pf = 0.0;
  for (double t : t_pf) mean_pf += t;
  mean_pf /= static_cast<double>(a.n);

  double mean_po = 0.0, ks_d = 0.0, ks_p = 1.0;
  if (a.sampler_check) {
    const double dt = std::min(a.dt, 0.01 / a.omega);
    t_po.resize(a.n);
    for (auto& t : t_po) {
      const auto s = sample_exit_path_oracle(prob, dt, rng_po);
      t = s.time;
      if (s.side == ExitSide::Lower) ++low_po;
    }
    for (double t : t_po) mean_po += t;
    mean_po /= static_cast<double>(a.n);
    ks_d = ks_two_sample_statistic(t_pf, t_po);
    ks_p = ks_two_sample_pvalue(ks_d, t_pf.size(), t_po.size());
  }

  // plot-ready conditional densities from the solved CDFs
  {
    const PdeSolution sol =
        solve_exit_pdes(prob, 20.0 / a.omega, a.pde_nx, a.pde_nt);
    std::ofstream os(dir / "pde_solution.csv", std::ios::binary);
    write_pde_solution_csv(os, sol);
  }
  {
    std::ofstream os(dir / "conditional_densities.csv", std::ios::binary);
    os << "t_s,cdf_lower,cdf_upper,pdf_lower,pdf_upper\n";
    if (prob.start != prob.lower && prob.start != prob.upper) {
      char buf[200];
      const double t_end = cdf.cdf_lower.x_back();
      const std::size_t m = 2000;
      for (std::size_t i = 0; i <= m; ++i) {
        const double t = t_end * static_cast<double>(i) / static_cast<double>(m);
        const double cl = cdf.cdf_lower(t) / probs.lower;
        const double cu = cdf.cdf_upper(t) / probs.upper;
        const double dl = cdf.cdf_lower.derivative(t) / probs.lower;
        const double du = cdf.cdf_upper.derivative(t) / probs.upper;
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", t, cl, cu, dl,
                      du);
        os << buf;
      }
    }
  }
  if (a.dump_samples) {
    std::ofstream os(dir / "samples.csv", std::ios::binary);
    os << "sampler,time_s\n";
    char buf[64];
    for (double t : t_pf) {
      std::snprintf(buf, sizeof buf, "pathfree,%.17g\n", t);
      os << buf;
    }
    for (double t : t_po) {
      std::snprintf(buf, sizeof buf, "oracle,%.17g\n", t);
      os << buf;
    }
  }
  {
    char buf[1024];
    std::snprintf(buf, sizeof buf,
                  "{\n"
                  "  \"p_lower\": %.17g,\n"
                  "  \"p_upper\": %.17g,\n"
                  "  \"expected_exit_time_s\": %.17g,\n"
                  "  \"expected_exit_position\": %.17g,\n"
                  "  \"n_samples\": %llu,\n"
                  "  \"pathfree_mean_s\": %.17g,\n"
                  "  \"pathfree_lower_freq\": %.17g,\n"
                  "  \"oracle_mean_s\": %.17g,\n"
                  "  \"oracle_lower_freq\": %.17g,\n"
                  "  \"ks_d\": %.17g,\n"
                  "  \"ks_p\": %.17g\n"
                  "}\n",
                  probs.lower, probs.upper, e_tau, e_pos,
                  static_cast<unsigned long long>(a.n), mean_pf,
                  static_cast<double>(low_pf) / static_cast<double>(a.n), mean_po,
                  a.sampler_check ? static_cast<double>(low_po) / static_cast<double>(a.n)
                                  : 0.0,
                  ks_d, ks_p);
    write_file(dir / "exit_stats.json", buf);
    std::cout << buf;
  }
  write_manifest(dir, app);
  if (a.sampler_check && ks_p < 0.01) {
    std::cerr << "sampler cross-check failed: KS p = " << ks_p << "\n";
    return 3;
  }
  return 0;
}

// ---- conditionals ----------------------------------------------------------

struct ConditionalsArgs {
  ModelFlags model;
  double z_min = -1.0;
  double z_max = 1.0;
  std::size_t z_points = 401;
  std::uint64_t overlay_n = 0;
  std::uint64_t seed = 1;
  std::string out = "evpix_out";
};

int run_conditionals(const ConditionalsArgs& a, CLI::App& app) {
  const ModelParams p = a.model.resolve();
  if (!(a.z_min < a.z_max) || a.z_points < 2)
    throw std::invalid_argument("conditionals: need z_min < z_max and z_points >= 2");
  const fs::path dir = prepare_out_dir(a.out);
  {
    std::ofstream os(dir / "conditionals.csv", std::ios::binary);
    os << "z,p_on,p_off,expected_isi_s,expected_z_next\n";
    char buf[200];
    for (std::size_t i = 0; i < a.z_points; ++i) {
      const double z = a.z_min + (a.z_max - a.z_min) * static_cast<double>(i) /
                                     static_cast<double>(a.z_points - 1);
      const auto probs = conditional_event_probs(p, z);
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", z, probs.upper,
                    probs.lower, conditional_expected_isi(p, z),
                    conditional_expected_z(p, z));
      os << buf;
    }
  }
  const CriticalPointReport rep = critical_point(p);
  {
    char buf[768];
    const bool nd = rep.near_determinism.has_value();
    std::snprintf(buf, sizeof buf,
                  "{\n"
                  "  \"z_star\": %.17g,\n"
                  "  \"isi_argmax\": %.17g,\n"
                  "  \"expectation_root\": %.17g,\n"
                  "  \"near_determinism_lo\": %s,\n"
                  "  \"near_determinism_hi\": %s,\n"
                  "  \"prob_level_0_99_lo\": %.17g,\n"
                  "  \"prob_level_0_99_hi\": %.17g\n"
                  "}\n",
                  rep.z_star, rep.isi_argmax, rep.expectation_root,
                  nd ? std::to_string(rep.near_determinism->first).c_str() : "null",
                  nd ? std::to_string(rep.near_determinism->second).c_str() : "null",
                  rep.prob_level_0_99.first, rep.prob_level_0_99.second);
    write_file(dir / "critical_point.json", buf);
    std::cout << buf;
  }
  if (a.overlay_n > 0) {
    // binned Monte Carlo overlay from a simulated stream
    Rng rng(derive_stream_seed(a.seed, "conditionals-overlay"));
    const EventStream s = simulate_event_stream(p, 0.0, a.overlay_n, rng);
    std::vector<std::pair<double, const Event*>> by_z;
    by_z.reserve(s.events.size());
    for (const Event& e : s.events) by_z.emplace_back(e.z_before, &e);
    std::sort(by_z.begin(), by_z.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    const std::size_t skip = by_z.size() / 100;  // central 98%
    const std::size_t usable = by_z.size() - 2 * skip;
    const std::size_t n_bins = std::min<std::size_t>(50, usable / 50);
    std::ofstream os(dir / "overlay.csv", std::ios::binary);
    os << "z_mean,n,p_on_hat,mean_isi_s\n";
    char buf[160];
    for (std::size_t b = 0; b < n_bins; ++b) {
      const std::size_t i0 = skip + b * usable / n_bins;
      const std::size_t i1 = skip + (b + 1) * usable / n_bins;
      double zs = 0.0, isi = 0.0, on = 0.0;
      for (std::size_t i = i0; i < i1; ++i) {
        zs += by_z[i].first;
        isi += by_z[i].second->isi;
        on += by_z[i].second->polarity == Polarity::On ? 1.0 : 0.0;
      }
      const double cnt = static_cast<double>(i1 - i0);
      std::snprintf(buf, sizeof buf, "%.17g,%zu,%.17g,%.17g\n", zs / cnt, i1 - i0,
                    on / cnt, isi / cnt);
      os << buf;
    }
  }
  write_manifest(dir, app);
  return 0;
}

// ---- dynamics ----------------------------------------------------------------

struct DynamicsArgs {
  ModelFlags model;
  double z0 = 0.0;
  std::size_t iters = 50;
  std::string out = "evpix_out";
};

int run_dynamics(const DynamicsArgs& a, CLI::App& app) {
  const ModelParams p = a.model.resolve();
  const fs::path dir = prepare_out_dir(a.out);
  const RecursionTrace tr = iterate_conditionals(p, a.z0, a.iters);
  {
    std::ofstream os(dir / "iterates.csv", std::ios::binary);
    write_trace_csv(os, tr);
  }
  {
    const auto segs = lemeray_trace(p, a.z0, a.iters);
    std::ofstream os(dir / "cobweb.csv", std::ios::binary);
    write_cobweb_csv(os, segs);
  }
  const auto fps = find_fixed_points(p);
  {
    std::string json = "{\n  \"fixed_points\": [\n";
    char buf[256];
    for (std::size_t i = 0; i < fps.size(); ++i) {
      std::snprintf(buf, sizeof buf,
                    "    {\"location\": %.17g, \"derivative\": %.17g, \"stable\": %s}%s\n",
                    fps[i].location, fps[i].derivative, fps[i].stable ? "true" : "false",
                    i + 1 < fps.size() ? "," : "");
      json += buf;
    }
    json += "  ],\n";
    const char* cls = tr.classification == TailClass::FixedPoint   ? "fixed_point"
                      : tr.classification == TailClass::LimitCycle ? "limit_cycle"
                                                                   : "undetermined";
    std::snprintf(buf, sizeof buf, "  \"classification\": \"%s\",\n", cls);
    json += buf;
    if (tr.classification == TailClass::FixedPoint) {
      std::snprintf(buf, sizeof buf,
                    "  \"fixed_point\": %.17g,\n  \"stable\": %s\n", tr.fixed_point,
                    tr.fixed_point_stable ? "true" : "false");
      json += buf;
    } else if (tr.classification == TailClass::LimitCycle) {
      std::snprintf(buf, sizeof buf, "  \"cycle\": [%.17g, %.17g]\n", tr.cycle_a,
                    tr.cycle_b);
      json += buf;
    } else {
      json += "  \"cycle\": null\n";
    }
    json += "}\n";
    write_file(dir / "report.json", json);
    std::cout << json;
  }
  write_manifest(dir, app);
  return 0;
}

// ---- mstep -------------------------------------------------------------------

struct MstepArgs {
  ModelFlags model;
  double start = -0.5;
  std::vector<std::size_t> m_list{0, 1, 2, 3, 4, 5, 6, 7, 200};
  std::uint64_t replicas = 100000;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string out = "evpix_out";
};

int run_mstep(const MstepArgs& a, CLI::App& app) {
  const ModelParams p = a.model.resolve();
  const fs::path dir = prepare_out_dir(a.out);
  const auto dens = m_step_density_kde(p, a.start, a.m_list, a.replicas, a.seed,
                                       a.threads);
  {
    std::ofstream os(dir / "mstep_kde.csv", std::ios::binary);
    os << "m,z,density\n";
    char buf[128];
    for (std::size_t c = 0; c < dens.curves.size(); ++c) {
      for (std::size_t i = 0; i < dens.curves[c].grid.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", dens.m_values[c],
                      dens.curves[c].grid[i], dens.curves[c].density[i]);
        os << buf;
      }
    }
  }
  const CriticalPointReport rep = critical_point(p);
  {
    char buf[128];
    std::snprintf(buf, sizeof buf, "{\n  \"z_star\": %.17g\n}\n", rep.z_star);
    write_file(dir / "zstar.json", buf);
    std::cout << buf;
  }
  write_manifest(dir, app);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evpix: continuous-time event-pixel simulation and analysis"};
  app.set_config("--config", "", "read options from an INI manifest (flags override)");
  app.require_subcommand(0, 1);

  StreamArgs stream_args;
  auto* stream = app.add_subcommand("stream", "simulate an event stream (Algorithm-2 role)");
  stream->configurable();
  stream_args.model.add_to(stream);
  stream->add_option("--start", stream_args.start, "initial reference voltage Z_0")
      ->capture_default_str();
  stream->add_option("--n", stream_args.n, "number of events")->capture_default_str();
  stream->add_option("--seed", stream_args.seed, "master seed")->capture_default_str();
  stream->add_option("--out", stream_args.out, "output directory")->capture_default_str();
  stream->add_option("--format", stream_args.format, "stream format: jsonl | csv | both")
      ->check(CLI::IsMember({"jsonl", "csv", "both"}))
      ->capture_default_str();
  stream->add_option("--cache-spacing", stream_args.cache_spacing,
                     "z-lattice spacing for cached exit CDFs")
      ->capture_default_str();
  stream->add_flag("--exact-cache", stream_args.exact_cache,
                   "disable the z-lattice (bit-exact exit laws)");
  stream->add_option("--bins-per-decade", stream_args.bins_per_decade,
                     "ISI histogram resolution")
      ->capture_default_str();

  ExitStatsArgs exit_args;
  auto* exit_cmd =
      app.add_subcommand("exit-stats", "closed-form and sampled OU exit statistics");
  exit_cmd->configurable();
  exit_cmd->add_option("--omega", exit_args.omega, "mean-reversion rate (rad/s)")
      ->capture_default_str();
  exit_cmd->add_option("--lower", exit_args.lower, "lower interval bound")
      ->capture_default_str();
  exit_cmd->add_option("--upper", exit_args.upper, "upper interval bound")
      ->capture_default_str();
  exit_cmd->add_option("--x0", exit_args.x0, "start position")->capture_default_str();
  exit_cmd->add_option("--n", exit_args.n, "Monte Carlo samples")->capture_default_str();
  exit_cmd->add_option("--dt", exit_args.dt, "path-oracle step (s)")->capture_default_str();
  exit_cmd->add_option("--seed", exit_args.seed, "master seed")->capture_default_str();
  exit_cmd->add_option("--out", exit_args.out, "output directory")->capture_default_str();
  exit_cmd->add_flag("--sampler-check", exit_args.sampler_check,
                     "run the bridge oracle and a KS cross-check (nonzero exit on failure)");
  exit_cmd->add_flag("--dump-samples", exit_args.dump_samples, "write samples.csv");
  exit_cmd->add_option("--pde-nx", exit_args.pde_nx, "PDE dump spatial nodes")
      ->capture_default_str();
  exit_cmd->add_option("--pde-nt", exit_args.pde_nt, "PDE dump time steps")
      ->capture_default_str();

  ConditionalsArgs cond_args;
  auto* cond = app.add_subcommand("conditionals",
                                  "conditional event statistics on a z grid");
  cond->configurable();
  cond_args.model.add_to(cond);
  cond->add_option("--z-min", cond_args.z_min, "grid start")->capture_default_str();
  cond->add_option("--z-max", cond_args.z_max, "grid end")->capture_default_str();
  cond->add_option("--z-points", cond_args.z_points, "grid points")->capture_default_str();
  cond->add_option("--overlay-n", cond_args.overlay_n,
                   "events for the binned Monte Carlo overlay (0 = skip)")
      ->capture_default_str();
  cond->add_option("--seed", cond_args.seed, "master seed")->capture_default_str();
  cond->add_option("--out", cond_args.out, "output directory")->capture_default_str();

  DynamicsArgs dyn_args;
  auto* dyn = app.add_subcommand("dynamics",
                                 "deterministic recursion, cobweb trace, fixed points");
  dyn->configurable();
  dyn_args.model.add_to(dyn);
  dyn->add_option("--z0", dyn_args.z0, "initial iterate")->capture_default_str();
  dyn->add_option("--iters", dyn_args.iters, "iterations")->capture_default_str();
  dyn->add_option("--out", dyn_args.out, "output directory")->capture_default_str();

  MstepArgs mstep_args;
  auto* mstep = app.add_subcommand("mstep", "m-step transition density KDEs");
  mstep->configurable();
  mstep_args.model.add_to(mstep);
  mstep->add_option("--start", mstep_args.start, "chain start z")->capture_default_str();
  mstep->add_option("--m", mstep_args.m_list, "m values")->capture_default_str();
  mstep->add_option("--replicas", mstep_args.replicas, "independent chains")
      ->capture_default_str();
  mstep->add_option("--seed", mstep_args.seed, "master seed")->capture_default_str();
  mstep->add_option("--threads", mstep_args.threads,
                    "worker threads (0 = hardware parallelism)")
      ->capture_default_str();
  mstep->add_option("--out", mstep_args.out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (stream->parsed()) return run_stream(stream_args, app);
    if (exit_cmd->parsed()) return run_exit_stats(exit_args, app);
    if (cond->parsed()) return run_conditionals(cond_args, app);
    if (dyn->parsed()) return run_dynamics(dyn_args, app);
    if (mstep->parsed()) return run_mstep(mstep_args, app);
    std::cerr << app.help();
    return 2;
  } catch (const numerical_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

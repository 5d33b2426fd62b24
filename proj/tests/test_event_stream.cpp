#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <vector>

#include "evpix/event_stream.hpp"
#include "oracles.hpp"

using namespace evpix;

namespace {

ModelParams paper_params() {
  ModelParams p;
  p.omega = 5.0;
  p.rho = 0.002;
  p.theta_minus = 0.96;
  p.theta_plus = 0.94;
  return p;
}

}  // namespace

TEST_CASE("ModelParams: derived quantities and validation") {
  ModelParams p = paper_params();
  CHECK(p.alpha() == Catch::Approx(std::exp(-0.01)).epsilon(1e-15));
  CHECK(p.sigma_alpha() ==
        Catch::Approx(std::sqrt((1.0 - std::exp(-0.02)) / 2.0)).epsilon(1e-14));
  p.sigma_alpha_mode = SigmaAlphaMode::SdeConsistent;
  CHECK(p.sigma_alpha() ==
        Catch::Approx(std::sqrt((1.0 - std::exp(-0.02)) / 10.0)).epsilon(1e-14));
  p.rho = -1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.rho = 0.0;
  p.theta_plus = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("reference chain: infinite refractory limit gives iid Gaussians") {
  ModelParams p = paper_params();
  p.rho = 1e9;  // alpha = 0
  CHECK(p.alpha() == 0.0);
  Rng rng(12);
  const auto zs = simulate_reference_chain(p, 25.0, 200000, rng);
  const double sa = p.sigma_alpha();
  CHECK(std::abs(oracles::mean(zs)) < 4.0 * sa / std::sqrt(200000.0));
  CHECK(oracles::variance(zs) == Catch::Approx(sa * sa).epsilon(0.02));
  // lag-1 correlation vanishes
  double c = 0.0;
  for (std::size_t i = 1; i < zs.size(); ++i) c += zs[i] * zs[i - 1];
  c /= (static_cast<double>(zs.size()) - 1.0) * sa * sa;
  CHECK(std::abs(c) < 0.01);
}

TEST_CASE("reference chain: symmetric thresholds center the chain") {
  ModelParams p = paper_params();
  p.theta_minus = p.theta_plus = 0.95;
  Rng rng(2025);
  const auto zs = simulate_reference_chain(p, 0.3, 1000000, rng);
  const double se = oracles::batch_se(zs);
  CHECK(std::abs(oracles::mean(zs)) < 4.0 * se);
}

TEST_CASE("reference chain: near-symmetric histogram at paper parameters") {
  Rng rng(7);
  const auto zs = simulate_reference_chain(paper_params(), 0.0, 1000000, rng);
  const double m = oracles::mean(zs);
  const double sd = std::sqrt(oracles::variance(zs));
  double m3 = 0.0;
  for (double z : zs) m3 += std::pow(z - m, 3);
  m3 /= static_cast<double>(zs.size());
  CHECK(std::abs(m3 / (sd * sd * sd)) < 0.1);
}

TEST_CASE("event stream: rho = 0 makes ISI equal the exit time") {
  ModelParams p = paper_params();
  p.rho = 0.0;
  Rng rng(3);
  const auto s = simulate_event_stream(p, 0.0, 200, rng);
  for (const Event& e : s.events) {
    CHECK(e.isi >= 0.0);
    // with alpha = 1, sigma_alpha = 0 the reference tracks the exit position
    CHECK(e.z_after == e.exit_position);
  }
}

TEST_CASE("event stream: determinism, reconstruction, polarity law") {
  const ModelParams p = paper_params();
  Rng r1(42), r2(42);
  const auto s1 = simulate_event_stream(p, 0.0, 3000, r1);
  const auto s2 = simulate_event_stream(p, 0.0, 3000, r2);
  REQUIRE(s1.events.size() == s2.events.size());
  const double a = p.alpha();
  const double sa = p.sigma_alpha();
  double t_prev = 0.0;
  for (std::size_t i = 0; i < s1.events.size(); ++i) {
    const Event& e = s1.events[i];
    const Event& f = s2.events[i];
    // bit-identical repeat under the same seed
    CHECK(e.timestamp == f.timestamp);
    CHECK(e.z_after == f.z_after);
    CHECK(e.polarity == f.polarity);
    // timestamp identity and refractory floor
    CHECK(e.timestamp == t_prev + e.isi);
    CHECK(e.isi >= p.rho);
    t_prev = e.timestamp;
    // the refractory update reconstructs exactly from the recorded draw
    CHECK(e.z_after == chain_update(a, sa, e.exit_position, e.noise));
    // polarity matches the exit side geometry
    if (e.polarity == Polarity::On)
      CHECK(e.exit_position == e.z_before + p.theta_plus);
    else
      CHECK(e.exit_position == e.z_before - p.theta_minus);
    // chain linkage
    if (i > 0) CHECK(e.z_before == s1.events[i - 1].z_after);
  }
}

TEST_CASE("one-step transition density: normalization and alpha = 0 limit") {
  const ModelParams p = paper_params();
  const double z = -0.5;
  const double sa = p.sigma_alpha();
  const double lo = p.alpha() * (z - p.theta_minus) - 10.0 * sa;
  const double hi = p.alpha() * (z + p.theta_plus) + 10.0 * sa;
  const double mass = oracles::integrate(
      [&](double zp) { return one_step_transition_density(p, z, zp); }, lo, hi, 1e-10);
  CHECK(mass == Catch::Approx(1.0).margin(1e-8));

  ModelParams q = paper_params();
  q.rho = 1e9;  // alpha = 0: density independent of z
  const double d1 = one_step_transition_density(q, -1.0, 0.3);
  const double d2 = one_step_transition_density(q, 2.0, 0.3);
  const double expect = norm_pdf(0.3 / q.sigma_alpha()) / q.sigma_alpha();
  CHECK(d1 == Catch::Approx(expect).epsilon(1e-12));
  CHECK(d2 == Catch::Approx(expect).epsilon(1e-12));
}

TEST_CASE("one-step transition density matches a KDE of chain samples") {
  // the transition density peaks near 4, so the KDE noise floor needs a
  // couple million samples before a 0.05 sup-norm bound is meaningful
  const ModelParams p = paper_params();
  const double z = -0.5;
  Rng rng(17);
  const std::size_t n = 2000000;
  std::vector<double> samples(n);
  const double a = p.alpha();
  const double sa = p.sigma_alpha();
  const double p_off = exit_side_probs(p.exit_problem(z)).lower;
  for (auto& s : samples) {
    const double x = rng.uniform() < p_off ? z - p.theta_minus : z + p.theta_plus;
    s = chain_update(a, sa, x, rng.normal());
  }
  const KdeCurve curve = kde(samples, 0.01);
  double sup = 0.0;
  for (std::size_t i = 0; i < curve.grid.size(); ++i) {
    sup = std::max(sup, std::abs(curve.density[i] -
                                 one_step_transition_density(p, z, curve.grid[i])));
  }
  CHECK(sup < 0.05);
}

TEST_CASE("m-step densities: point mass, one-step match, settling") {
  const ModelParams p = paper_params();
  const auto dens = m_step_density_kde(p, -0.5, {0, 1}, 2000000, 99, 2);
  REQUIRE(dens.curves.size() == 2);

  // m = 0: a narrow bump at the start
  const KdeCurve& d0 = dens.curves[0];
  double mode_x = 0.0, mode_v = 0.0;
  for (std::size_t i = 0; i < d0.grid.size(); ++i)
    if (d0.density[i] > mode_v) {
      mode_v = d0.density[i];
      mode_x = d0.grid[i];
    }
  CHECK(std::abs(mode_x - (-0.5)) < 1e-2);

  // m = 1 against the analytic one-step density
  const KdeCurve& d1 = dens.curves[1];
  double sup = 0.0;
  for (std::size_t i = 0; i < d1.grid.size(); ++i)
    sup = std::max(sup, std::abs(d1.density[i] -
                                 one_step_transition_density(p, -0.5, d1.grid[i])));
  CHECK(sup < 0.05);

  // m = 150 vs m = 200: the limit state has been reached
  const auto settle = m_step_density_kde(p, -0.5, {150, 200}, 300000, 98, 2);
  CHECK(kde_sup_distance(settle.curves[0], settle.curves[1]) < 0.02);

  // density oscillation: modes of the first steps alternate around z*
  const auto osc = m_step_density_kde(p, -0.5, {1, 2, 3, 4, 5, 6, 7}, 40000, 31, 2);
  std::vector<int> side;
  for (const auto& c : osc.curves) {
    double mx = 0.0, mv = 0.0;
    for (std::size_t i = 0; i < c.grid.size(); ++i)
      if (c.density[i] > mv) {
        mv = c.density[i];
        mx = c.grid[i];
      }
    side.push_back(mx > 0.01 ? 1 : -1);
  }
  for (std::size_t i = 1; i < side.size(); ++i) CHECK(side[i] == -side[i - 1]);
}

TEST_CASE("m-step densities are independent of the thread count") {
  const ModelParams p = paper_params();
  const auto a = m_step_density_kde(p, -0.5, {3, 7}, 4000, 5, 1);
  const auto b = m_step_density_kde(p, -0.5, {3, 7}, 4000, 5, 3);
  for (std::size_t c = 0; c < a.curves.size(); ++c) {
    REQUIRE(a.curves[c].density.size() == b.curves[c].density.size());
    for (std::size_t i = 0; i < a.curves[c].density.size(); ++i)
      CHECK(a.curves[c].density[i] == b.curves[c].density[i]);
  }
}

TEST_CASE("conditional statistics: closed-form spot values") {
  const ModelParams p = paper_params();

  // symmetric thresholds at the center: even split, zero drift
  ModelParams sym = p;
  sym.theta_minus = sym.theta_plus = 0.95;
  const auto probs = conditional_event_probs(sym, 0.0);
  CHECK(probs.lower == Catch::Approx(0.5).epsilon(1e-13));
  CHECK(conditional_expected_z(sym, 0.0) == Catch::Approx(0.0).margin(1e-15));

  // vanishing thresholds: immediate exit, ISI collapses to rho
  ModelParams tiny = p;
  tiny.theta_minus = tiny.theta_plus = 1e-5;
  CHECK(conditional_expected_isi(tiny, 0.0) == Catch::Approx(p.rho).margin(1e-8));

  // huge refractory: global damping kills the conditional expectation
  ModelParams damped = p;
  damped.rho = 1e9;
  for (double z : {-1.0, 0.0, 2.0})
    CHECK(conditional_expected_z(damped, z) == 0.0);
}

TEST_CASE("conditional expected ISI matches binned stream averages") {
  const ModelParams p = paper_params();
  Rng rng(2718281);
  const auto s = simulate_event_stream(p, 0.0, 60000, rng);
  // 12 equal-count bins over the central mass of z_before
  std::vector<std::pair<double, double>> zw;
  zw.reserve(s.events.size());
  for (const Event& e : s.events) zw.emplace_back(e.z_before, e.isi);
  std::sort(zw.begin(), zw.end());
  const std::size_t skip = zw.size() / 100;
  const std::size_t usable = zw.size() - 2 * skip;
  const std::size_t n_bins = 12;
  const std::size_t per = usable / n_bins;
  for (std::size_t b = 0; b < n_bins; ++b) {
    double zsum = 0.0, wsum = 0.0;
    for (std::size_t i = skip + b * per; i < skip + (b + 1) * per; ++i) {
      zsum += zw[i].first;
      wsum += zw[i].second;
    }
    const double z_mid = zsum / static_cast<double>(per);
    const double w_emp = wsum / static_cast<double>(per);
    const double w_analytic = conditional_expected_isi(p, z_mid);
    // binning + Monte Carlo tolerance at this sample size
    CHECK(w_emp == Catch::Approx(w_analytic).epsilon(0.08));
  }
}

TEST_CASE("stationary statistics at paper parameters") {
  const ModelParams p = paper_params();
  Rng rng(123456);
  const auto st = stationary_stats(p, 10000, 300000, rng);
  CHECK(st.pi_on + st.pi_off == 1.0);
  CHECK(st.pi_on == Catch::Approx(0.505).margin(0.01));
  CHECK(st.r_total == Catch::Approx(0.431).margin(0.03));
  CHECK(st.r_on + st.r_off == Catch::Approx(st.r_total).margin(1e-12));

  ModelParams slow = p;
  slow.rho = 0.39;
  Rng rng2(654321);
  const auto st2 = stationary_stats(slow, 10000, 300000, rng2);
  CHECK(st2.r_total == Catch::Approx(0.361).margin(0.03));
  CHECK_THROWS_AS(stationary_stats(p, 10, 100, rng), std::invalid_argument);
}

TEST_CASE("stationary statistics are insensitive to the start") {
  // burn-in from different origins lands on the same stationary answers
  const ModelParams p = paper_params();
  std::vector<double> pis;
  for (std::uint64_t k = 0; k < 3; ++k) {
    Rng rng(derive_stream_seed(77, "stationary-start", k));
    pis.push_back(stationary_stats(p, 20000, 150000, rng).pi_on);
  }
  for (double v : pis) CHECK(v == Catch::Approx(pis[0]).margin(0.012));
}

TEST_CASE("algorithm-1 and algorithm-2 chains share the same law") {
  const ModelParams p = paper_params();
  const std::size_t n = 1000;
  const std::size_t reps = 400;
  std::vector<double> z1(reps), z2(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    Rng ra(derive_stream_seed(1, "alg1", r));
    z1[r] = simulate_reference_chain(p, 0.0, n, ra).back();
    Rng rb(derive_stream_seed(2, "alg2", r));
    z2[r] = simulate_event_stream(p, 0.0, n, rb).events.back().z_after;
  }
  CHECK(oracles::ks_statistic(z1, z2) < oracles::ks_critical(0.01, reps, reps));
}

TEST_CASE("limit density mirror symmetry under threshold swap") {
  ModelParams p = paper_params();
  ModelParams mirrored = p;
  std::swap(mirrored.theta_minus, mirrored.theta_plus);
  Rng r1(31337), r2(73313);
  const auto za = simulate_reference_chain(p, 0.0, 1000000, r1);
  auto zb = simulate_reference_chain(mirrored, 0.0, 1000000, r2);
  for (double& z : zb) z = -z;
  const double d = kde_sup_distance(kde(za), kde(zb));
  CHECK(d < 0.05);
}

TEST_CASE("polarity transition matrix at paper parameters") {
  const ModelParams p = paper_params();
  Rng rng(8675309);
  const auto s = simulate_event_stream(p, 0.0, 60000, rng);
  const auto m = polarity_transition_matrix(s);
  CHECK(m(Polarity::On, Polarity::On) + m(Polarity::On, Polarity::Off) == 1.0);
  CHECK(m(Polarity::Off, Polarity::On) + m(Polarity::Off, Polarity::Off) == 1.0);
  // forward conditionals measured from the model
  CHECK(m(Polarity::On, Polarity::Off) == Catch::Approx(0.906).margin(0.01));
  CHECK(m(Polarity::Off, Polarity::On) == Catch::Approx(0.926).margin(0.01));
  CHECK(m(Polarity::On, Polarity::On) == Catch::Approx(0.094).margin(0.01));
  CHECK(m(Polarity::Off, Polarity::Off) == Catch::Approx(0.074).margin(0.01));

  EventStream tiny;
  tiny.events.resize(1);
  CHECK_THROWS_AS(polarity_transition_matrix(tiny), std::invalid_argument);
}

TEST_CASE("serialization formats") {
  ModelParams p = paper_params();
  Rng rng(55);
  EventStream s = simulate_event_stream(p, 0.0, 3, rng);
  s.seed = 55;

  std::ostringstream jsonl;
  write_event_stream_jsonl(jsonl, s);
  const std::string j = jsonl.str();
  CHECK(j.find("\"meta\"") != std::string::npos);
  CHECK(j.find("\"seed\":55") != std::string::npos);
  CHECK(std::count(j.begin(), j.end(), '\n') == 4);  // meta + 3 events

  std::ostringstream csv;
  write_event_stream_csv(csv, s);
  const std::string c = csv.str();
  CHECK(c.find("# omega_rad_s=5") == 0);
  CHECK(c.find("index,timestamp_s,polarity,isi_s,z_before,z_after,exit_position") !=
        std::string::npos);
  CHECK(std::count(c.begin(), c.end(), '\n') == 5);  // comment + header + 3 events
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "evpix/dynamics.hpp"

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

ModelParams slow_params() {
  ModelParams p = paper_params();
  p.rho = 0.39;
  return p;
}

}  // namespace

TEST_CASE("iterate_conditionals: paper parameters reach the published 2-cycle") {
  const auto tr = iterate_conditionals(paper_params(), 0.0, 50);
  REQUIRE(tr.z.size() == 50);
  for (std::size_t i = 0; i < tr.u.size(); ++i) {
    CHECK(tr.u[i] + tr.v[i] == Catch::Approx(1.0).margin(1e-12));
    CHECK(tr.w[i] >= paper_params().rho);
  }
  REQUIRE(tr.classification == TailClass::LimitCycle);
  CHECK(tr.cycle_a == Catch::Approx(-0.624).margin(0.005));
  CHECK(tr.cycle_b == Catch::Approx(0.312).margin(0.005));

  // refined cycle points exchange under the map
  const ModelParams p = paper_params();
  CHECK(conditional_expected_z(p, tr.cycle_a) == Catch::Approx(tr.cycle_b).margin(1e-6));
  CHECK(conditional_expected_z(p, tr.cycle_b) == Catch::Approx(tr.cycle_a).margin(1e-6));

  // event-probability iterates settle into the alternating 0/1 pattern
  for (std::size_t i = tr.u.size() - 6; i < tr.u.size(); ++i) {
    CHECK(std::min(tr.u[i], tr.v[i]) < 0.01);
    CHECK(std::max(tr.u[i], tr.v[i]) > 0.99);
  }
}

TEST_CASE("iterate_conditionals: long refractory converges to a stable point") {
  const auto tr = iterate_conditionals(slow_params(), 0.2, 80);
  REQUIRE(tr.classification == TailClass::FixedPoint);
  CHECK(tr.fixed_point == Catch::Approx(0.005).margin(0.003));
  CHECK(tr.fixed_point_stable);
  // conditional probabilities hover near 1/2 (their limits are the side
  // probabilities at the fixed point, which sits slightly off z*)
  const auto limit = conditional_event_probs(slow_params(), tr.fixed_point);
  for (std::size_t i = tr.u.size() - 6; i < tr.u.size(); ++i) {
    CHECK(tr.u[i] == Catch::Approx(0.5).margin(0.05));
    CHECK(tr.v[i] == Catch::Approx(0.5).margin(0.05));
  }
  CHECK(tr.u.back() == Catch::Approx(limit.lower).margin(0.005));
  // the ISI iterate settles far above the oscillatory case's cycle values
  CHECK(tr.w.back() > 5.0);
}

TEST_CASE("find_fixed_points") {
  // symmetric thresholds: the origin is a fixed point
  ModelParams sym = paper_params();
  sym.theta_minus = sym.theta_plus = 0.95;
  const auto fps_sym = find_fixed_points(sym);
  bool found_zero = false;
  for (const auto& f : fps_sym)
    if (std::abs(f.location) < 1e-9) found_zero = true;
  CHECK(found_zero);

  // paper parameters: a single unstable fixed point near 0.009
  const auto fps = find_fixed_points(paper_params());
  REQUIRE(fps.size() == 1);
  CHECK(fps[0].location == Catch::Approx(0.009).margin(0.003));
  CHECK_FALSE(fps[0].stable);
  CHECK(std::abs(fps[0].derivative) > 1.0);

  // long refractory: a single stable fixed point near 0.005
  const auto fps2 = find_fixed_points(slow_params());
  REQUIRE(fps2.size() == 1);
  CHECK(fps2[0].location == Catch::Approx(0.005).margin(0.003));
  CHECK(fps2[0].stable);

  CHECK_THROWS_AS(find_fixed_points(paper_params(), {1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("stability classification agrees with iteration behavior") {
  // stable case: nearby starts converge to the fixed point
  const auto fp_stable = find_fixed_points(slow_params())[0];
  for (double dz : {-0.01, 0.01}) {
    const auto tr = iterate_conditionals(slow_params(), fp_stable.location + dz, 120);
    CHECK(std::abs(tr.z.back() - fp_stable.location) < 1e-3);
  }
  // unstable case: nearby starts depart over the first ten iterates
  const auto fp_unstable = find_fixed_points(paper_params())[0];
  for (double dz : {-0.01, 0.01}) {
    const auto tr = iterate_conditionals(paper_params(), fp_unstable.location + dz, 10);
    CHECK(std::abs(tr.z.back() - fp_unstable.location) > std::abs(dz));
  }
}

TEST_CASE("lemeray trace geometry") {
  const ModelParams p = paper_params();
  const auto segs = lemeray_trace(p, 0.0, 50);
  REQUIRE(!segs.empty());
  for (const auto& s : segs) {
    if (s.kind == CobwebSegment::Kind::ToCurve) {
      // vertical segment lands exactly on (z, f(z))
      CHECK(s.x1 == s.x0);
      CHECK(s.y1 == conditional_expected_z(p, s.x1));
    } else {
      // horizontal segment lands exactly on the diagonal
      CHECK(s.y1 == s.y0);
      CHECK(s.x1 == s.y1);
    }
  }
  // terminal verticals alternate between the two cycle points
  const auto& last = segs[segs.size() - 1];
  const auto& prev = segs[segs.size() - 3];
  const double lo = std::min(last.y1, prev.y1);
  const double hi = std::max(last.y1, prev.y1);
  CHECK(lo == Catch::Approx(-0.624).margin(0.005));
  CHECK(hi == Catch::Approx(0.312).margin(0.005));

  // fixed-point start degenerates to zero-length segments (the unstable
  // point amplifies the root-finding residual by |f'| ~ 6.5 per iterate,
  // so only a few steps stay at roundoff scale)
  const auto fp = find_fixed_points(paper_params())[0];
  const auto still = lemeray_trace(p, fp.location, 4);
  for (const auto& s : still) {
    CHECK(std::abs(s.x1 - s.x0) < 1e-6);
    CHECK(std::abs(s.y1 - s.y0) < 1e-6);
  }

  // long-refractory trace contracts toward the stable point
  const auto segs2 = lemeray_trace(slow_params(), 0.2, 50);
  CHECK(segs2.back().y1 == Catch::Approx(0.005).margin(0.003));
}

TEST_CASE("critical point report") {
  // symmetric thresholds put the crossing at the origin
  ModelParams sym = paper_params();
  sym.theta_minus = sym.theta_plus = 0.95;
  CHECK(critical_point(sym).z_star == Catch::Approx(0.0).margin(1e-9));

  const auto rep = critical_point(paper_params());
  CHECK(rep.z_star == Catch::Approx(0.01).margin(0.005));
  // the three characterizations coincide
  CHECK(std::abs(rep.z_star - rep.isi_argmax) < 0.005);
  CHECK(std::abs(rep.z_star - rep.expectation_root) < 0.005);

  REQUIRE(rep.near_determinism.has_value());
  CHECK(rep.near_determinism->first == Catch::Approx(-0.029).margin(0.005));
  CHECK(rep.near_determinism->second == Catch::Approx(0.049).margin(0.005));

  // the exact 0.99 level set of the probability curves is far wider
  CHECK(rep.prob_level_0_99.first < -0.2);
  CHECK(rep.prob_level_0_99.second > 0.2);

  // heavily damped map: no near-determinism interval exists
  const auto rep2 = critical_point(slow_params());
  CHECK_FALSE(rep2.near_determinism.has_value());
}

#pragma once

// Deterministic diagnostics of the reference-voltage recursion
// z_n = E(Z_n | Z_{n-1} = z_{n-1}): conditional iterates, fixed points with
// stability, cobweb (Lemeray) traces, and the critical point where the
// conditional event probabilities cross.

#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "evpix/event_stream.hpp"

namespace evpix {

enum class TailClass { FixedPoint, LimitCycle, Undetermined };

struct RecursionTrace {
  std::vector<double> z;  // z_1..z_n
  std::vector<double> u;  // P(off | z_{n-1})
  std::vector<double> v;  // P(on  | z_{n-1})
  std::vector<double> w;  // E(ISI | z_{n-1}), seconds
  TailClass classification = TailClass::Undetermined;
  double fixed_point = 0.0;   // valid when classification == FixedPoint
  bool fixed_point_stable = false;
  double cycle_a = 0.0;       // valid when classification == LimitCycle
  double cycle_b = 0.0;
};

struct FixedPointReport {
  double location = 0.0;
  double derivative = 0.0;  // f'(z*) by central difference
  bool stable = false;      // |f'| < 1
  bool marginal = false;    // ||f'| - 1| < 1e-3
};

namespace detail {

inline double bisect(const std::function<double(double)>& f, double a, double b,
                     double fa, double tol = 1e-10) {
  double fb = f(b);
  (void)fb;
  while (b - a > tol) {
    const double mid = 0.5 * (a + b);
    const double fm = f(mid);
    if ((fa <= 0.0) == (fm <= 0.0)) {
      a = mid;
      fa = fm;
    } else {
      b = mid;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace detail

inline FixedPointReport analyze_fixed_point(const ModelParams& p, double z_star) {
  const double h = 1e-5;
  FixedPointReport r;
  r.location = z_star;
  r.derivative =
      (conditional_expected_z(p, z_star + h) - conditional_expected_z(p, z_star - h)) /
      (2.0 * h);
  r.stable = std::abs(r.derivative) < 1.0;
  r.marginal = std::abs(std::abs(r.derivative) - 1.0) < 1e-3;
  return r;
}

// Locate all roots of f(z) - z on a dense grid over the search interval
// (sign-change bracketing, then bisection).
inline std::vector<FixedPointReport> find_fixed_points(
    const ModelParams& p, std::pair<double, double> search_interval,
    std::size_t grid_points = 4001) {
  p.validate();
  auto [lo, hi] = search_interval;
  if (!(lo < hi)) throw std::invalid_argument("find_fixed_points: empty search interval");
  auto g = [&](double z) { return conditional_expected_z(p, z) - z; };
  std::vector<FixedPointReport> out;
  double prev_z = lo;
  double prev_g = g(lo);
  for (std::size_t i = 1; i < grid_points; ++i) {
    const double z =
        lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid_points - 1);
    const double gz = g(z);
    if (prev_g == 0.0) {
      out.push_back(analyze_fixed_point(p, prev_z));
    } else if ((prev_g < 0.0) != (gz < 0.0)) {
      const double root = detail::bisect(g, prev_z, z, prev_g);
      out.push_back(analyze_fixed_point(p, root));
    }
    prev_z = z;
    prev_g = gz;
  }
  return out;
}

inline std::vector<FixedPointReport> find_fixed_points(const ModelParams& p) {
  const double scale = std::max(1.0, 1.0 / std::sqrt(2.0 * p.omega));
  return find_fixed_points(
      p, {-(p.theta_minus + 3.0) * scale, (p.theta_plus + 3.0) * scale});
}

// Algorithm-3 iterates with tail classification.  Raw iterate recurrences at
// moderate n are still contracting, so candidate fixed points and 2-cycles
// detected in the tail are refined by bisection (f(z) = z, f(f(z)) = z)
// before the 1e-6 recurrence tolerance is applied.
inline RecursionTrace iterate_conditionals(const ModelParams& p, double z0, std::size_t n) {
  p.validate();
  if (n < 1) throw std::invalid_argument("iterate_conditionals: n must be >= 1");
  RecursionTrace tr;
  tr.z.reserve(n);
  tr.u.reserve(n);
  tr.v.reserve(n);
  tr.w.reserve(n);
  double z = z0;
  for (std::size_t i = 0; i < n; ++i) {
    const ExitSideProbs probs = conditional_event_probs(p, z);
    tr.u.push_back(probs.lower);
    tr.v.push_back(probs.upper);
    tr.w.push_back(conditional_expected_isi(p, z));
    z = conditional_expected_z(p, z);
    tr.z.push_back(z);
  }

  const double tol = 1e-6;
  const std::size_t tail = std::max<std::size_t>(2, n / 5);
  const std::size_t begin = n - tail;
  double d1 = 0.0, d2 = 0.0;
  for (std::size_t i = begin; i < n; ++i) {
    if (i >= 1) d1 = std::max(d1, std::abs(tr.z[i] - tr.z[i - 1]));
    if (i >= 2) d2 = std::max(d2, std::abs(tr.z[i] - tr.z[i - 2]));
  }
  auto f = [&](double zz) { return conditional_expected_z(p, zz); };

  // candidate fixed point: stride-1 recurrence settled (or still visibly
  // contracting toward one point)
  if (d1 < std::max(tol, 1e-2)) {
    const double guess = tr.z.back();
    auto g = [&](double zz) { return f(zz) - zz; };
    const double span = std::max(10.0 * d1, 1e-4);
    double a = guess - span, b = guess + span;
    if (g(a) * g(b) <= 0.0) {
      const double root = detail::bisect(g, a, b, g(a));
      if (std::abs(f(root) - root) < tol) {
        tr.classification = TailClass::FixedPoint;
        tr.fixed_point = root;
        tr.fixed_point_stable = analyze_fixed_point(p, root).stable;
        return tr;
      }
    }
  }
  // candidate 2-cycle: stride-2 recurrence much tighter than stride-1
  if (n >= 4 && d2 < std::max(tol, 0.05 * d1)) {
    auto g2 = [&](double zz) { return f(f(zz)) - zz; };
    const double span = std::max(10.0 * d2, 1e-4);
    double guess = tr.z.back();
    double a = guess - span, b = guess + span;
    if (g2(a) * g2(b) <= 0.0) {
      const double pa = detail::bisect(g2, a, b, g2(a));
      const double pb = f(pa);
      if (std::abs(f(pb) - pa) < tol && std::abs(pa - pb) > tol) {
        tr.classification = TailClass::LimitCycle;
        tr.cycle_a = std::min(pa, pb);
        tr.cycle_b = std::max(pa, pb);
        return tr;
      }
    }
  }
  tr.classification = TailClass::Undetermined;
  return tr;
}

// Cobweb construction: the (z_k, z_{k+1}) point, then a horizontal segment
// to the diagonal and a vertical segment back to the curve.
struct CobwebSegment {
  std::size_t k = 0;
  double x0 = 0.0, y0 = 0.0;
  double x1 = 0.0, y1 = 0.0;
  enum class Kind { ToCurve, ToDiagonal } kind = Kind::ToCurve;
};

inline std::vector<CobwebSegment> lemeray_trace(const ModelParams& p, double z0,
                                                std::size_t n) {
  p.validate();
  if (n < 1) throw std::invalid_argument("lemeray_trace: n must be >= 1");
  std::vector<CobwebSegment> segs;
  segs.reserve(2 * n);
  double z = z0;
  double fz = conditional_expected_z(p, z);
  // initial vertical rise from the diagonal point (z0, z0) to the curve
  segs.push_back({0, z, z, z, fz, CobwebSegment::Kind::ToCurve});
  for (std::size_t k = 1; k < n; ++k) {
    // horizontal to the diagonal
    segs.push_back({k, z, fz, fz, fz, CobwebSegment::Kind::ToDiagonal});
    const double z_next = fz;
    fz = conditional_expected_z(p, z_next);
    // vertical to the curve
    segs.push_back({k, z_next, z_next, z_next, fz, CobwebSegment::Kind::ToCurve});
    z = z_next;
  }
  return segs;
}

struct CriticalPointReport {
  double z_star = 0.0;            // where p_on = p_off = 1/2
  double isi_argmax = 0.0;        // grid argmax of E(ISI | z)
  double expectation_root = 0.0;  // root of E(Z_n | z) nearest the origin
  // outside [lo, hi] the Gaussian surrogate of the next reference keeps its
  // sign with >= 99% probability: |E(Z_n | z)| >= ppf(0.99) sigma_alpha
  std::optional<std::pair<double, double>> near_determinism;
  // exact 0.99 level set of the conditional event probabilities, for contrast
  std::pair<double, double> prob_level_0_99{0.0, 0.0};
};

inline CriticalPointReport critical_point(const ModelParams& p) {
  p.validate();
  CriticalPointReport rep;
  const double span = p.theta_minus + p.theta_plus;

  auto podiff = [&](double z) { return conditional_event_probs(p, z).lower - 0.5; };
  rep.z_star = detail::bisect(podiff, -span, span, podiff(-span));

  // ISI argmax: coarse grid then golden-section refinement
  {
    const double lo = rep.z_star - 0.5 * span, hi = rep.z_star + 0.5 * span;
    double best_z = lo, best_w = -1.0;
    const std::size_t m = 201;
    for (std::size_t i = 0; i < m; ++i) {
      const double z = lo + (hi - lo) * static_cast<double>(i) / (m - 1);
      const double w = conditional_expected_isi(p, z);
      if (w > best_w) {
        best_w = w;
        best_z = z;
      }
    }
    const double gr = 0.6180339887498949;
    double a = best_z - (hi - lo) / (m - 1), b = best_z + (hi - lo) / (m - 1);
    double c = b - gr * (b - a), d = a + gr * (b - a);
    while (b - a > 1e-9) {
      if (conditional_expected_isi(p, c) > conditional_expected_isi(p, d)) {
        b = d;
      } else {
        a = c;
      }
      c = b - gr * (b - a);
      d = a + gr * (b - a);
    }
    rep.isi_argmax = 0.5 * (a + b);
  }

  // root of f(z) = E(Z_n | z) nearest the origin
  {
    auto froot = [&](double z) { return conditional_expected_z(p, z); };
    const double grid_half = span;
    double best = std::numeric_limits<double>::quiet_NaN();
    const std::size_t m = 2001;
    double prev_z = -grid_half, prev_f = froot(prev_z);
    for (std::size_t i = 1; i < m; ++i) {
      const double z = -grid_half + 2.0 * grid_half * static_cast<double>(i) / (m - 1);
      const double fz = froot(z);
      if ((prev_f < 0.0) != (fz < 0.0)) {
        const double root = detail::bisect(froot, prev_z, z, prev_f);
        if (std::isnan(best) || std::abs(root) < std::abs(best)) best = root;
      }
      prev_z = z;
      prev_f = fz;
    }
    rep.expectation_root = best;
  }

  // near-determinism endpoints on the steep central branch of f
  {
    const double target = norm_ppf(0.99) * p.sigma_alpha();
    auto f = [&](double z) { return conditional_expected_z(p, z); };
    // bracket the descending branch around z*: walk outward until f crosses
    double a = rep.z_star, b = rep.z_star;
    const double step = 1e-3 * span;
    bool ok_lo = false, ok_hi = false;
    for (double z = rep.z_star; z > rep.z_star - span; z -= step) {
      if (f(z) >= target) {
        a = z;
        ok_lo = true;
        break;
      }
      if (f(z) < f(z + step) && f(z + step) < target) break;  // past the local max
    }
    for (double z = rep.z_star; z < rep.z_star + span; z += step) {
      if (f(z) <= -target) {
        b = z;
        ok_hi = true;
        break;
      }
      if (f(z) > f(z - step) && f(z - step) > -target) break;  // past the local min
    }
    if (ok_lo && ok_hi) {
      auto glo = [&](double z) { return f(z) - target; };
      auto ghi = [&](double z) { return f(z) + target; };
      const double lo = detail::bisect(glo, a, rep.z_star, glo(a));
      const double hi = detail::bisect(ghi, rep.z_star, b, ghi(rep.z_star));
      rep.near_determinism = std::make_pair(lo, hi);
    }
  }

  // exact 0.99 level set of the event-probability curves
  {
    auto pon = [&](double z) { return conditional_event_probs(p, z).upper - 0.99; };
    auto poff = [&](double z) { return conditional_event_probs(p, z).lower - 0.99; };
    const double far = 4.0 * span;
    rep.prob_level_0_99.first = detail::bisect(pon, -far, rep.z_star, pon(-far));
    rep.prob_level_0_99.second = detail::bisect(poff, rep.z_star, far, poff(rep.z_star));
  }
  return rep;
}

// Trace/cobweb CSV (k, z_k, z_{k+1}, segment_type) for external plotting.
inline void write_cobweb_csv(std::ostream& os, const std::vector<CobwebSegment>& segs) {
  os << "k,x0,y0,x1,y1,segment_type\n";
  char buf[192];
  for (const auto& s : segs) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%s\n", s.k, s.x0, s.y0,
                  s.x1, s.y1,
                  s.kind == CobwebSegment::Kind::ToCurve ? "to_curve" : "to_diagonal");
    os << buf;
  }
}

inline void write_trace_csv(std::ostream& os, const RecursionTrace& tr) {
  os << "n,z,p_off,p_on,expected_isi_s\n";
  char buf[192];
  for (std::size_t i = 0; i < tr.z.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", i + 1, tr.z[i],
                  tr.u[i], tr.v[i], tr.w[i]);
    os << buf;
  }
}

}  // namespace evpix

#pragma once

// Exit statistics of the unit-diffusion OU process dX = -omega X dt + dW
// leaving an interval (lower, upper): closed-form exit-side law and expected
// exit time, Kolmogorov-backward-equation solutions for the exit-time
// distributions, and two samplers of the joint (time, side) law — a
// path-free sampler driven by CDF inversion and a bridge-corrected path
// oracle for validation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <shared_mutex>
#include <stdexcept>
#include <vector>

#include "evpix/rng.hpp"
#include "evpix/special_functions.hpp"

namespace evpix {

struct ExitProblem {
  double omega = 1.0;   // mean-reversion rate (rad/s)
  double lower = -1.0;  // interval bounds, dimensionless
  double upper = 1.0;
  double start = 0.0;

  void validate() const {
    if (!(omega > 0.0)) throw std::invalid_argument("ExitProblem: omega must be > 0");
    if (!(lower < upper)) throw std::domain_error("ExitProblem: requires lower < upper");
    if (!(start >= lower && start <= upper))
      throw std::invalid_argument("ExitProblem: start must lie in [lower, upper]");
  }
};

enum class ExitSide { Lower, Upper };

struct ExitSample {
  double time = 0.0;  // seconds
  ExitSide side = ExitSide::Lower;
};

struct ExitSideProbs {
  double lower = 0.0;
  double upper = 0.0;
};

// Theorem-style closed form: P(exit at lower) through the erfi ratio,
// evaluated with the Dawson scaling so large arguments never overflow.
inline ExitSideProbs exit_side_probs(const ExitProblem& p, const EvalOptions& opt = {}) {
  p.validate();
  if (p.start == p.lower) return {1.0, 0.0};
  if (p.start == p.upper) return {0.0, 1.0};
  const double sw = std::sqrt(p.omega);
  double pl = erfi_interval_ratio(sw * p.upper, sw * p.start, sw * p.lower, opt);
  pl = std::clamp(pl, 0.0, 1.0);
  return {pl, 1.0 - pl};
}

inline double expected_exit_position(const ExitProblem& p, const EvalOptions& opt = {}) {
  const ExitSideProbs probs = exit_side_probs(p, opt);
  return p.lower * probs.lower + p.upper * probs.upper;
}

namespace detail {

// Tridiagonal coefficients of the spatial operator
//   L = 1/2 d^2/dx^2 - omega x d/dx
// at interior nodes, with first-order upwinding of the drift wherever the
// cell Peclet number 2|omega x|dx exceeds 2 (keeps the scheme an M-matrix).
struct OperatorBands {
  std::vector<double> sub, diag, sup;
};

inline OperatorBands build_operator(double omega, const std::vector<double>& xs) {
  const std::size_t n = xs.size() - 2;
  const double dx = xs[1] - xs[0];
  const double diff = 0.5 / (dx * dx);
  OperatorBands b;
  b.sub.resize(n);
  b.diag.resize(n);
  b.sup.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double drift = -omega * xs[i + 1];
    if (std::abs(drift) * dx <= 1.0) {  // Peclet = 2|drift|dx <= 2: central
      b.sub[i] = diff - drift / (2.0 * dx);
      b.diag[i] = -2.0 * diff;
      b.sup[i] = diff + drift / (2.0 * dx);
    } else if (drift > 0.0) {
      b.sub[i] = diff;
      b.diag[i] = -2.0 * diff - drift / dx;
      b.sup[i] = diff + drift / dx;
    } else {
      b.sub[i] = diff - drift / dx;
      b.diag[i] = -2.0 * diff + drift / dx;
      b.sup[i] = diff;
    }
  }
  return b;
}

// Prefactored Thomas solve of (I - w L) g = rhs.
struct TridiagFactor {
  std::vector<double> c_prime;  // modified superdiagonal
  std::vector<double> inv_diag;
  std::vector<double> sub;

  void factor(const OperatorBands& b, double w) {
    const std::size_t n = b.diag.size();
    c_prime.resize(n);
    inv_diag.resize(n);
    sub.resize(n);
    double d0 = 1.0 - w * b.diag[0];
    inv_diag[0] = 1.0 / d0;
    c_prime[0] = -w * b.sup[0] * inv_diag[0];
    for (std::size_t i = 1; i < n; ++i) {
      sub[i] = -w * b.sub[i];
      double denom = (1.0 - w * b.diag[i]) - sub[i] * c_prime[i - 1];
      inv_diag[i] = 1.0 / denom;
      c_prime[i] = -w * b.sup[i] * inv_diag[i];
    }
  }

  void solve_inplace(std::vector<double>& rhs) const {
    const std::size_t n = rhs.size();
    rhs[0] *= inv_diag[0];
    for (std::size_t i = 1; i < n; ++i)
      rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) * inv_diag[i];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c_prime[i] * rhs[i + 1];
  }
};

// One theta-step of d g/dt = L g with constant Dirichlet data (bl, bu).
class ThetaStepper {
public:
  ThetaStepper(const OperatorBands& b, double bl, double bu)
      : b_(&b), bl_(bl), bu_(bu) {}

  void set_step(double theta, double dt) {
    theta_ = theta;
    dt_ = dt;
    fac_.factor(*b_, theta * dt);
  }

  void advance(std::vector<double>& g) const {
    const std::size_t n = g.size();
    rhs_.resize(n);
    const double we = (1.0 - theta_) * dt_;
    for (std::size_t i = 0; i < n; ++i) {
      const double gm = i == 0 ? bl_ : g[i - 1];
      const double gp = i + 1 == n ? bu_ : g[i + 1];
      rhs_[i] = g[i] + we * (b_->sub[i] * gm + b_->diag[i] * g[i] + b_->sup[i] * gp);
    }
    rhs_[0] += theta_ * dt_ * b_->sub[0] * bl_;
    rhs_[n - 1] += theta_ * dt_ * b_->sup[n - 1] * bu_;
    fac_.solve_inplace(rhs_);
    g.swap(rhs_);
  }

private:
  const OperatorBands* b_;
  double bl_, bu_;
  double theta_ = 0.5, dt_ = 0.0;
  TridiagFactor fac_;
  mutable std::vector<double> rhs_;
};

inline double interp_interior(const std::vector<double>& xs, const std::vector<double>& g,
                              double bl, double bu, double x) {
  // g holds interior nodes; boundaries carry (bl, bu)
  const double dx = xs[1] - xs[0];
  const std::size_t last = xs.size() - 1;
  double s = (x - xs[0]) / dx;
  std::size_t i = static_cast<std::size_t>(std::clamp(s, 0.0, static_cast<double>(last - 1)));
  double w = s - static_cast<double>(i);
  auto value_at = [&](std::size_t k) {
    if (k == 0) return bl;
    if (k == last) return bu;
    return g[k - 1];
  };
  return (1.0 - w) * value_at(i) + w * value_at(i + 1);
}

}  // namespace detail

// Discretized solutions of the backward-equation boundary-value problems:
// g1 = P(tau <= t), g2 = P(tau <= t, exit at lower), g3 = P(tau <= t, exit
// at upper), on a shared (x, t) grid; row-major [time][space].
struct PdeSolution {
  std::vector<double> grid_x;
  std::vector<double> grid_t;
  std::vector<double> g1, g2, g3;  // size grid_t.size() * grid_x.size()

  double at(const std::vector<double>& g, std::size_t it, std::size_t ix) const {
    return g[it * grid_x.size() + ix];
  }
};

// Crank-Nicolson solve on a uniform (nx x nt) grid, with a Rannacher
// backward-Euler startup to damp the boundary-data discontinuity.
inline PdeSolution solve_exit_pdes(const ExitProblem& p, double t_max, std::size_t nx,
                                   std::size_t nt) {
  p.validate();
  if (nx < 64 || nt < 64) throw std::invalid_argument("solve_exit_pdes: nx, nt must be >= 64");
  if (!(t_max > 0.0)) throw std::invalid_argument("solve_exit_pdes: t_max must be > 0");

  PdeSolution sol;
  sol.grid_x.resize(nx);
  const double dx = (p.upper - p.lower) / static_cast<double>(nx - 1);
  for (std::size_t i = 0; i < nx; ++i) sol.grid_x[i] = p.lower + dx * static_cast<double>(i);
  sol.grid_x.back() = p.upper;

  const double dt = t_max / static_cast<double>(nt);
  sol.grid_t.resize(nt + 1);
  for (std::size_t k = 0; k <= nt; ++k) sol.grid_t[k] = dt * static_cast<double>(k);

  const detail::OperatorBands bands = detail::build_operator(p.omega, sol.grid_x);

  struct Component {
    double bl, bu;
    std::vector<double> g;            // interior values
    std::vector<double>* out;
  };
  Component comps[3] = {{1.0, 1.0, {}, &sol.g1},
                        {1.0, 0.0, {}, &sol.g2},
                        {0.0, 1.0, {}, &sol.g3}};

  for (auto& c : comps) {
    c.g.assign(nx - 2, 0.0);
    c.out->assign((nt + 1) * nx, 0.0);
    (*c.out)[0] = c.bl;
    (*c.out)[nx - 1] = c.bu;
  }

  auto record = [&](Component& c, std::size_t it) {
    double* row = c.out->data() + it * nx;
    row[0] = c.bl;
    row[nx - 1] = c.bu;
    std::copy(c.g.begin(), c.g.end(), row + 1);
  };

  for (auto& c : comps) {
    detail::ThetaStepper stepper(bands, c.bl, c.bu);
    std::size_t it = 1;
    // Rannacher startup: the first two dt intervals as four BE half-steps
    stepper.set_step(1.0, dt / 2.0);
    for (int s = 0; s < 2 && it <= nt; ++s) {
      stepper.advance(c.g);
      stepper.advance(c.g);
      record(c, it++);
    }
    stepper.set_step(0.5, dt);
    for (; it <= nt; ++it) {
      stepper.advance(c.g);
      record(c, it);
    }
    for (double v : c.g)
      if (v < -1e-6 || v > 1.0 + 1e-6)
        throw numerical_error("solve_exit_pdes: scheme left [0,1] beyond tolerance");
  }
  return sol;
}

namespace detail {

// Monotone cubic (Fritsch-Carlson) interpolant of a nondecreasing CDF.
class MonotoneCubic {
public:
  MonotoneCubic() = default;
  MonotoneCubic(std::vector<double> x, std::vector<double> y)
      : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    m_.assign(n, 0.0);
    if (n < 2) return;
    std::vector<double> d(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k)
      d[k] = (y_[k + 1] - y_[k]) / (x_[k + 1] - x_[k]);
    m_[0] = d[0];
    m_[n - 1] = d[n - 2];
    for (std::size_t k = 1; k + 1 < n; ++k)
      m_[k] = (d[k - 1] * d[k] > 0.0) ? 0.5 * (d[k - 1] + d[k]) : 0.0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      if (d[k] == 0.0) {
        m_[k] = m_[k + 1] = 0.0;
        continue;
      }
      double a = m_[k] / d[k], b = m_[k + 1] / d[k];
      double s = a * a + b * b;
      if (s > 9.0) {
        double t = 3.0 / std::sqrt(s);
        m_[k] = t * a * d[k];
        m_[k + 1] = t * b * d[k];
      }
    }
  }

  double operator()(double xq) const {
    const auto [i, u, h] = locate(xq);
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
    const double h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u);
    const double h11 = u * u * (u - 1);
    return h00 * y_[i] + h * h10 * m_[i] + h01 * y_[i + 1] + h * h11 * m_[i + 1];
  }

  double derivative(double xq) const {
    const auto [i, u, h] = locate(xq);
    const double d00 = 6.0 * u * (u - 1.0) / h;
    const double d10 = (1 - u) * (1 - 3 * u);
    const double d01 = -d00;
    const double d11 = u * (3 * u - 2);
    return d00 * y_[i] + d10 * m_[i] + d01 * y_[i + 1] + d11 * m_[i + 1];
  }

  double x_front() const { return x_.front(); }
  double x_back() const { return x_.back(); }
  double y_back() const { return y_.back(); }

  // Inverse query for a nondecreasing interpolant, bisected to time_tol.
  double invert(double target, double time_tol = 1e-10) const {
    if (target <= y_.front()) return x_.front();
    if (target >= y_.back()) return x_.back();
    std::size_t hi = static_cast<std::size_t>(
        std::upper_bound(y_.begin(), y_.end(), target) - y_.begin());
    std::size_t lo = hi - 1;
    // skip flat knot runs
    while (lo > 0 && y_[lo] == y_[lo - 1]) --lo;
    double a = x_[lo], b = x_[std::min(hi, x_.size() - 1)];
    while (b - a > time_tol) {
      double mid = 0.5 * (a + b);
      if ((*this)(mid) < target)
        a = mid;
      else
        b = mid;
    }
    return 0.5 * (a + b);
  }

private:
  std::tuple<std::size_t, double, double> locate(double xq) const {
    std::size_t i = static_cast<std::size_t>(
        std::upper_bound(x_.begin(), x_.end(), xq) - x_.begin());
    i = std::clamp<std::size_t>(i, 1, x_.size() - 1) - 1;
    const double h = x_[i + 1] - x_[i];
    double u = (xq - x_[i]) / h;
    u = std::clamp(u, 0.0, 1.0);
    return {i, u, h};
  }

  std::vector<double> x_, y_, m_;
};

}  // namespace detail

// Time-CDF of the exit law observed from one start point: knots of
// t -> P(tau <= t, side) for both sides, plus the closed-form side split.
// This is the representation the path-free sampler inverts.
struct ExitTimeCdf {
  ExitProblem problem;
  double p_lower_exact = 0.0;   // Theorem-form side probability
  double covered_lower = 0.0;   // joint mass covered by the knots
  double covered_upper = 0.0;
  double tail_bound = 0.0;      // 1 - g1(start, t_end)
  detail::MonotoneCubic cdf_lower;
  detail::MonotoneCubic cdf_upper;
};

struct ExitCdfOptions {
  std::size_t nx = 401;
  double tail_eps = 1e-9;        // march until 1 - g1(start, t) < tail_eps
  double growth = 1.05;          // time-step growth after the startup phase
  double max_step_efold = 0.05;  // cap dt at this fraction of the tail scale
};

// March the g2/g3 problems in time, recording the CDFs at the start point,
// until the residual tail mass drops below tail_eps.  The time step grows
// geometrically once the boundary transient has passed; Crank-Nicolson is
// A-stable and the tail varies on the scale of the decay rate, which caps
// the step.
inline ExitTimeCdf solve_exit_cdf(const ExitProblem& p, const ExitCdfOptions& opt = {}) {
  p.validate();
  ExitTimeCdf out;
  out.problem = p;
  out.p_lower_exact = exit_side_probs(p).lower;
  if (p.start == p.lower || p.start == p.upper) {
    out.covered_lower = out.p_lower_exact;
    out.covered_upper = 1.0 - out.p_lower_exact;
    return out;
  }

  const std::size_t nx = std::max<std::size_t>(opt.nx, 64);
  std::vector<double> xs(nx);
  const double dx = (p.upper - p.lower) / static_cast<double>(nx - 1);
  for (std::size_t i = 0; i < nx; ++i) xs[i] = p.lower + dx * static_cast<double>(i);
  xs.back() = p.upper;

  const detail::OperatorBands bands = detail::build_operator(p.omega, xs);
  detail::ThetaStepper step2(bands, 1.0, 0.0);
  detail::ThetaStepper step3(bands, 0.0, 1.0);
  std::vector<double> g2(nx - 2, 0.0), g3(nx - 2, 0.0);

  std::vector<double> ts{0.0}, c2{0.0}, c3{0.0};
  double t = 0.0;
  double dt = dx;
  int k = 0;
  step2.set_step(1.0, dt / 2.0);
  step3.set_step(1.0, dt / 2.0);
  double lambda_hat = 0.0;

  auto record = [&]() {
    ts.push_back(t);
    c2.push_back(detail::interp_interior(xs, g2, 1.0, 0.0, p.start));
    c3.push_back(detail::interp_interior(xs, g3, 0.0, 1.0, p.start));
  };

  // four BE half-steps (Rannacher), then CN
  for (int s = 0; s < 4; ++s) {
    step2.advance(g2);
    step3.advance(g3);
    t += dt / 2.0;
    record();
  }
  step2.set_step(0.5, dt);
  step3.set_step(0.5, dt);

  for (;;) {
    step2.advance(g2);
    step3.advance(g3);
    t += dt;
    record();
    ++k;
    const double tail = 1.0 - (c2.back() + c3.back());
    if (tail < opt.tail_eps) break;
    if ((k & 31) == 0) {
      // estimate the tail decay rate over the last checkpoint window
      const std::size_t n = ts.size();
      const std::size_t back = std::min<std::size_t>(32, n - 1);
      const double tail_prev = 1.0 - (c2[n - 1 - back] + c3[n - 1 - back]);
      if (tail_prev > tail && tail > 0.0)
        lambda_hat = std::log(tail_prev / tail) / (ts[n - 1] - ts[n - 1 - back]);
      double cap = lambda_hat > 0.0 ? opt.max_step_efold / lambda_hat : 64.0 * dx;
      double next = std::min(dt * std::pow(opt.growth, 32.0), cap);
      if (next > dt * 1.0000001) {
        dt = next;
        step2.set_step(0.5, dt);
        step3.set_step(0.5, dt);
      }
      if (ts.size() > 4'000'000)
        throw numerical_error("solve_exit_cdf: time march exceeded knot budget");
    }
  }

  // clamp roundoff-scale dips so the interpolant is genuinely monotone
  for (std::size_t i = 1; i < c2.size(); ++i) {
    if (c2[i] < c2[i - 1]) {
      if (c2[i - 1] - c2[i] > 1e-9)
        throw numerical_error("solve_exit_cdf: non-monotone CDF");
      c2[i] = c2[i - 1];
    }
    if (c3[i] < c3[i - 1]) {
      if (c3[i - 1] - c3[i] > 1e-9)
        throw numerical_error("solve_exit_cdf: non-monotone CDF");
      c3[i] = c3[i - 1];
    }
  }

  out.covered_lower = c2.back();
  out.covered_upper = c3.back();
  out.tail_bound = 1.0 - (c2.back() + c3.back());
  out.cdf_lower = detail::MonotoneCubic(ts, std::move(c2));
  out.cdf_upper = detail::MonotoneCubic(std::move(ts), std::move(c3));
  return out;
}

// Conditional exit-time CDF P(tau <= t | exit side), read off a PdeSolution.
inline double conditional_exit_cdf(const PdeSolution& sol, const ExitProblem& p,
                                   ExitSide side, double t) {
  if (t < 0.0 || t > sol.grid_t.back())
    throw std::out_of_range("conditional_exit_cdf: t outside the solved horizon");
  const ExitSideProbs probs = exit_side_probs(p);
  const double denom = side == ExitSide::Lower ? probs.lower : probs.upper;
  const std::vector<double>& g = side == ExitSide::Lower ? sol.g2 : sol.g3;
  // bilinear in (t, x)
  const std::size_t nx = sol.grid_x.size();
  const double dtg = sol.grid_t[1] - sol.grid_t[0];
  std::size_t it = std::min(static_cast<std::size_t>(t / dtg), sol.grid_t.size() - 2);
  const double wt = (t - sol.grid_t[it]) / (sol.grid_t[it + 1] - sol.grid_t[it]);
  const double dxg = sol.grid_x[1] - sol.grid_x[0];
  double s = (p.start - sol.grid_x[0]) / dxg;
  std::size_t ix = static_cast<std::size_t>(std::clamp(s, 0.0, static_cast<double>(nx - 2)));
  const double wx = std::clamp(s - static_cast<double>(ix), 0.0, 1.0);
  auto val = [&](std::size_t i, std::size_t j) { return g[i * nx + j]; };
  const double lo = (1 - wx) * val(it, ix) + wx * val(it, ix + 1);
  const double hi = (1 - wx) * val(it + 1, ix) + wx * val(it + 1, ix + 1);
  return ((1 - wt) * lo + wt * hi) / denom;
}

// Build the sampler representation from a PdeSolution (start column).
inline ExitTimeCdf make_exit_time_cdf(const PdeSolution& sol, const ExitProblem& p) {
  ExitTimeCdf out;
  out.problem = p;
  out.p_lower_exact = exit_side_probs(p).lower;
  const std::size_t nx = sol.grid_x.size();
  const double dxg = sol.grid_x[1] - sol.grid_x[0];
  double s = (p.start - sol.grid_x[0]) / dxg;
  std::size_t ix = static_cast<std::size_t>(std::clamp(s, 0.0, static_cast<double>(nx - 2)));
  const double wx = std::clamp(s - static_cast<double>(ix), 0.0, 1.0);
  std::vector<double> c2(sol.grid_t.size()), c3(sol.grid_t.size());
  for (std::size_t it = 0; it < sol.grid_t.size(); ++it) {
    c2[it] = (1 - wx) * sol.g2[it * nx + ix] + wx * sol.g2[it * nx + ix + 1];
    c3[it] = (1 - wx) * sol.g3[it * nx + ix] + wx * sol.g3[it * nx + ix + 1];
  }
  for (std::size_t i = 1; i < c2.size(); ++i) {
    c2[i] = std::max(c2[i], c2[i - 1]);
    c3[i] = std::max(c3[i], c3[i - 1]);
  }
  out.covered_lower = c2.back();
  out.covered_upper = c3.back();
  out.tail_bound = 1.0 - (c2.back() + c3.back());
  out.cdf_lower = detail::MonotoneCubic(sol.grid_t, std::move(c2));
  out.cdf_upper = detail::MonotoneCubic(sol.grid_t, std::move(c3));
  return out;
}

// Invert the conditional exit-time CDF for one side at uniform draw u.
// Throws if the draw lands beyond the mass an under-resolved solution covers.
inline double invert_exit_time(const ExitTimeCdf& cdf, ExitSide side, double u,
                               double time_tol = 1e-10) {
  const bool lower = side == ExitSide::Lower;
  const double share = lower ? cdf.p_lower_exact : 1.0 - cdf.p_lower_exact;
  const double covered = lower ? cdf.covered_lower : cdf.covered_upper;
  const auto& curve = lower ? cdf.cdf_lower : cdf.cdf_upper;
  // slack covers the scheme's side-mass discretization error; genuinely
  // truncated solutions miss far more than this
  if (covered < share - 2e-4) {
    // under-resolved solution (t_max too small): draws beyond the covered
    // mass surface as a tail-mass error
    if (u * share > covered)
      throw numerical_error("invert_exit_time: draw exceeds covered CDF mass");
    return curve.invert(u * share, time_tol);
  }
  return curve.invert(u * covered, time_tol);
}

// Path-free draw of (tau, side): Bernoulli side from the closed form, then
// tau by inversion of the conditional CDF.
inline ExitSample sample_exit_pathfree(const ExitProblem& p, const ExitTimeCdf& cdf,
                                       Rng& rng) {
  p.validate();
  if (p.start == p.lower) return {0.0, ExitSide::Lower};
  if (p.start == p.upper) return {0.0, ExitSide::Upper};
  const ExitSide side =
      rng.uniform() < cdf.p_lower_exact ? ExitSide::Lower : ExitSide::Upper;
  const double t = invert_exit_time(cdf, side, rng.uniform());
  return {t, side};
}

inline ExitSample sample_exit_pathfree(const ExitProblem& p, const PdeSolution& sol,
                                       Rng& rng) {
  return sample_exit_pathfree(p, make_exit_time_cdf(sol, p), rng);
}

// Validation oracle: exact OU transition stepping with a Brownian-bridge
// crossing test between steps (crossing probability exp(-2(b-x0)(b-x1)/dt)
// with unit diffusion frozen across the step), correcting the hidden-path
// bias of naive barrier checks.
inline ExitSample sample_exit_path_oracle(const ExitProblem& p, double dt, Rng& rng) {
  p.validate();
  if (!(dt > 0.0) || dt > 0.01 / p.omega)
    throw std::invalid_argument("sample_exit_path_oracle: requires 0 < dt <= 0.01/omega");
  if (p.start == p.lower) return {0.0, ExitSide::Lower};
  if (p.start == p.upper) return {0.0, ExitSide::Upper};

  const double a = std::exp(-p.omega * dt);
  const double s = std::sqrt((1.0 - a * a) / (2.0 * p.omega));
  const double log_cut = 17.25 * dt;  // exp(-2q/dt) < 1e-15 beyond this
  double x = p.start;
  double t = 0.0;
  for (;;) {
    const double xn = a * x + s * rng.normal();
    if (xn <= p.lower) {
      const double w = (p.lower - x) / (xn - x);
      return {t + w * dt, ExitSide::Lower};
    }
    if (xn >= p.upper) {
      const double w = (p.upper - x) / (xn - x);
      return {t + w * dt, ExitSide::Upper};
    }
    const double ql = (p.lower - x) * (p.lower - xn);
    if (ql < log_cut && rng.uniform() < std::exp(-2.0 * ql / dt))
      return {t + 0.5 * dt, ExitSide::Lower};
    const double qu = (p.upper - x) * (p.upper - xn);
    if (qu < log_cut && rng.uniform() < std::exp(-2.0 * qu / dt))
      return {t + 0.5 * dt, ExitSide::Upper};
    x = xn;
    t += dt;
  }
}

namespace detail {

// Expected exit time through the closed form, with the whole combination
// accumulated in double-double: the three terms are of order exp(omega z^2)
// and cancel to O(1).
inline double expected_exit_time_closed(const ExitProblem& p, const EvalOptions& opt) {
  const double sw = std::sqrt(p.omega);
  const DD el = erfi_dd(sw * p.lower, opt);
  const DD eu = erfi_dd(sw * p.upper, opt);
  const DD ex = erfi_dd(sw * p.start, opt);
  const DD pl = dd_div(dd_sub(eu, ex), dd_sub(eu, el));
  const DD pu = dd_sub(DD(1.0), pl);
  const DD fl = hyp2f2_11_32_dd(p.omega * p.lower * p.lower, opt);
  const DD fu = hyp2f2_11_32_dd(p.omega * p.upper * p.upper, opt);
  const DD fx = hyp2f2_11_32_dd(p.omega * p.start * p.start, opt);
  const DD xterm = dd_mul(fx, p.start * p.start);
  const DD lterm = dd_sub(dd_mul(fl, p.lower * p.lower), xterm);
  const DD uterm = dd_sub(dd_mul(fu, p.upper * p.upper), xterm);
  const DD total = dd_add(dd_mul(pl, lterm), dd_mul(pu, uterm));
  return total.value();
}

// Cancellation-free fallback for large omega*z^2: solve the two-point BVP
//   1/2 h'' - omega x h' = -1,  h(lower) = h(upper) = 0
// on a fine grid and read h(start).
inline double expected_exit_time_bvp_grid(const ExitProblem& p, std::size_t nx) {
  std::vector<double> xs(nx);
  const double dx = (p.upper - p.lower) / static_cast<double>(nx - 1);
  for (std::size_t i = 0; i < nx; ++i) xs[i] = p.lower + dx * static_cast<double>(i);
  xs.back() = p.upper;
  const OperatorBands b = build_operator(p.omega, xs);
  const std::size_t n = nx - 2;
  // Thomas solve of L h = -1 with zero Dirichlet data
  std::vector<double> c_prime(n), h(n, -1.0);
  double inv = 1.0 / b.diag[0];
  c_prime[0] = b.sup[0] * inv;
  h[0] *= inv;
  for (std::size_t i = 1; i < n; ++i) {
    inv = 1.0 / (b.diag[i] - b.sub[i] * c_prime[i - 1]);
    c_prime[i] = b.sup[i] * inv;
    h[i] = (h[i] - b.sub[i] * h[i - 1]) * inv;
  }
  for (std::size_t i = n - 1; i-- > 0;) h[i] -= c_prime[i] * h[i + 1];
  return interp_interior(xs, h, 0.0, 0.0, p.start);
}

// second-order scheme, so one Richardson step lifts it to fourth order
inline double expected_exit_time_bvp(const ExitProblem& p, std::size_t nx = 2049) {
  const double coarse = expected_exit_time_bvp_grid(p, nx);
  const double fine = expected_exit_time_bvp_grid(p, 2 * nx - 1);
  return (4.0 * fine - coarse) / 3.0;
}

inline constexpr double exit_time_closed_form_limit = 45.0;  // omega * max z^2

}  // namespace detail

// Expected exit time (Theorem form: mixture of l^2 F(omega l^2) and
// u^2 F(omega u^2) terms about x^2 F(omega x^2)).  Falls back to the BVP
// route once omega*max(z^2) is large enough that even double-double
// accumulation of the closed form loses the result in cancellation.
inline double expected_exit_time(const ExitProblem& p, const EvalOptions& opt = {}) {
  p.validate();
  if (p.start == p.lower || p.start == p.upper) return 0.0;
  const double scale =
      p.omega * std::max(p.lower * p.lower, p.upper * p.upper);
  double v = scale <= detail::exit_time_closed_form_limit
                 ? detail::expected_exit_time_closed(p, opt)
                 : detail::expected_exit_time_bvp(p);
  return std::max(v, 0.0);
}

// Cache of exit-time CDFs for the translated threshold problems the event
// chain generates: (lower, upper) = (z - theta_minus, z + theta_plus),
// start z.  Keys live on a quantized z-lattice (spacing > 0) or on exact
// bit patterns (spacing == 0, the exactness mode).  Concurrent readers share
// the lock; insertion is single-writer.
class ExitCdfCache {
public:
  ExitCdfCache(double omega, double theta_minus, double theta_plus,
               double spacing = 0.01, ExitCdfOptions opt = {})
      : omega_(omega), theta_minus_(theta_minus), theta_plus_(theta_plus),
        spacing_(spacing), opt_(opt) {}

  std::shared_ptr<const ExitTimeCdf> get(double z) {
    const double zq = quantize(z);
    const std::int64_t key = key_of(zq);
    {
      std::shared_lock lock(mutex_);
      auto it = map_.find(key);
      if (it != map_.end()) return it->second;
    }
    ExitProblem prob{omega_, zq - theta_minus_, zq + theta_plus_, zq};
    auto cdf = std::make_shared<const ExitTimeCdf>(solve_exit_cdf(prob, opt_));
    std::unique_lock lock(mutex_);
    auto [it, inserted] = map_.emplace(key, std::move(cdf));
    return it->second;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return map_.size();
  }

  double quantize(double z) const {
    if (spacing_ <= 0.0) return z;
    return std::round(z / spacing_) * spacing_;
  }

private:
  std::int64_t key_of(double zq) const {
    if (spacing_ > 0.0) return static_cast<std::int64_t>(std::llround(zq / spacing_));
    std::int64_t bits;
    std::memcpy(&bits, &zq, sizeof bits);
    return bits;
  }

  double omega_, theta_minus_, theta_plus_, spacing_;
  ExitCdfOptions opt_;
  mutable std::shared_mutex mutex_;
  std::map<std::int64_t, std::shared_ptr<const ExitTimeCdf>> map_;
};

// Plot-ready dump (one row per grid point).
inline void write_pde_solution_csv(std::ostream& os, const PdeSolution& sol) {
  os << "x,t,g1,g2,g3\n";
  char buf[160];
  const std::size_t nx = sol.grid_x.size();
  for (std::size_t it = 0; it < sol.grid_t.size(); ++it) {
    for (std::size_t ix = 0; ix < nx; ++ix) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n",
                    sol.grid_x[ix], sol.grid_t[it], sol.g1[it * nx + ix],
                    sol.g2[it * nx + ix], sol.g3[it * nx + ix]);
      os << buf;
    }
  }
}

}  // namespace evpix

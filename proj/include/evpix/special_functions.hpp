#pragma once

// Special functions backing the closed-form OU exit statistics:
// imaginary error function erfi, Dawson function, the generalized
// hypergeometric 2F2({1,1};{3/2,2};x), and the standard normal pdf/cdf.
// All routines are pure and safe for concurrent use.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace evpix {

// Raised when an iterative evaluation fails to meet its tolerance.
class numerical_error : public std::runtime_error {
public:
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

struct EvalOptions {
  double rel_tol = 1e-12;
  int max_terms = 10000;

  void validate() const {
    if (!(rel_tol > 0.0) || rel_tol > 1e-6)
      throw std::invalid_argument("EvalOptions: rel_tol must be in (0, 1e-6]");
    if (max_terms < 64)
      throw std::invalid_argument("EvalOptions: max_terms must be >= 64");
  }
};

namespace detail {

inline constexpr double two_over_sqrt_pi = 1.1283791670955125738961589031;

// Double-double arithmetic (value + error compensation). Only the few
// operations the series accumulators need.
struct DD {
  double hi = 0.0;
  double lo = 0.0;

  constexpr DD() = default;
  constexpr DD(double h) : hi(h), lo(0.0) {}
  constexpr DD(double h, double l) : hi(h), lo(l) {}

  double value() const { return hi + lo; }
};

inline DD two_sum(double a, double b) {
  double s = a + b;
  double bb = s - a;
  double err = (a - (s - bb)) + (b - bb);
  return {s, err};
}

inline DD two_prod(double a, double b) {
  double p = a * b;
  double err = std::fma(a, b, -p);
  return {p, err};
}

inline DD dd_add(const DD& a, const DD& b) {
  DD s = two_sum(a.hi, b.hi);
  double lo = s.lo + a.lo + b.lo;
  DD r = two_sum(s.hi, lo);
  return r;
}

inline DD dd_add(const DD& a, double b) { return dd_add(a, DD(b)); }

inline DD dd_sub(const DD& a, const DD& b) { return dd_add(a, DD(-b.hi, -b.lo)); }

inline DD dd_mul(const DD& a, const DD& b) {
  DD p = two_prod(a.hi, b.hi);
  p.lo += a.hi * b.lo + a.lo * b.hi;
  return two_sum(p.hi, p.lo);
}

inline DD dd_mul(const DD& a, double b) { return dd_mul(a, DD(b)); }

inline DD dd_div(const DD& a, const DD& b) {
  double q0 = a.hi / b.hi;
  DD r = dd_sub(a, dd_mul(b, q0));
  double q1 = r.hi / b.hi;
  r = dd_sub(r, dd_mul(b, q1));
  double q2 = r.hi / b.hi;
  DD q = two_sum(q0, q1);
  q.lo += q2;
  return two_sum(q.hi, q.lo);
}

// Maclaurin sum of sqrt(pi)/2 * erfi(z) = sum_k z^(2k+1) / (k! (2k+1)),
// in double-double. Valid for any |z| with z^2 < ~700; all terms positive.
inline DD erfi_series_core_dd(double z, const EvalOptions& opt) {
  const double z2 = z * z;
  DD term(z);
  DD sum(z);
  for (int k = 1; k < opt.max_terms; ++k) {
    // term_k = z^(2k+1) / (k! (2k+1))
    term = dd_mul(term, z2 / static_cast<double>(k));
    DD contrib = dd_mul(term, 1.0 / (2.0 * k + 1.0));
    sum = dd_add(sum, contrib);
    if (std::abs(contrib.hi) < 1e-34 * std::abs(sum.hi) ||
        std::abs(contrib.hi) < opt.rel_tol * 1e-20 * std::abs(sum.hi))
      return sum;
  }
  throw numerical_error("erfi series did not converge");
}

inline double erfi_series_core(double z, const EvalOptions& opt) {
  const double z2 = z * z;
  double term = z;
  double sum = z;
  double comp = 0.0;  // Kahan compensation
  for (int k = 1; k < opt.max_terms; ++k) {
    term *= z2 / static_cast<double>(k);
    double contrib = term / (2.0 * k + 1.0);
    double y = contrib - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    if (std::abs(contrib) < opt.rel_tol * 0.01 * std::abs(sum)) return sum;
  }
  throw numerical_error("erfi series did not converge");
}

// Asymptotic series for the Dawson function, z >= ~6:
//   D(z) ~ 1/(2z) * sum_k (2k-1)!! / (2 z^2)^k
inline double dawson_asymptotic(double z, const EvalOptions& opt) {
  const double inv2z2 = 1.0 / (2.0 * z * z);
  double term = 1.0;
  double sum = 1.0;
  double prev = std::numeric_limits<double>::max();
  for (int k = 1; k < opt.max_terms; ++k) {
    term *= (2.0 * k - 1.0) * inv2z2;
    if (term > prev) break;  // divergent tail reached
    sum += term;
    prev = term;
    if (term < 1e-17 * sum) break;
  }
  return sum / (2.0 * z);
}

inline constexpr double dawson_series_cut = 6.25;

}  // namespace detail

// Dawson function D(z) = exp(-z^2) * Integral_0^z exp(t^2) dt.
inline double dawson(double z, const EvalOptions& opt = {}) {
  const double az = std::abs(z);
  if (az == 0.0) return z;
  double d;
  if (az < detail::dawson_series_cut) {
    d = std::exp(-az * az) * detail::erfi_series_core(az, opt);
  } else {
    d = detail::dawson_asymptotic(az, opt);
  }
  return z < 0.0 ? -d : d;
}

// Imaginary error function erfi(z) = (2/sqrt(pi)) Integral_0^z exp(t^2) dt.
// Throws on overflow of exp(z^2) (|z| beyond ~26.6); ratios of erfi values
// at large arguments should go through erfi_ratio / exit-probability code
// instead, which cancels the exponential factors analytically.
inline double erfi(double z, const EvalOptions& opt = {}) {
  if (!std::isfinite(z)) throw std::invalid_argument("erfi: argument must be finite");
  const double az = std::abs(z);
  if (az == 0.0) return z;
  double v;
  if (az <= detail::dawson_series_cut) {
    v = detail::two_over_sqrt_pi * detail::erfi_series_core(az, opt);
  } else {
    const double d = detail::dawson_asymptotic(az, opt);
    const double ln = az * az + std::log(detail::two_over_sqrt_pi * d);
    if (ln > 709.0)
      throw std::overflow_error("erfi: exp(z^2) exceeds the floating range");
    v = std::exp(ln);
  }
  return z < 0.0 ? -v : v;
}

namespace detail {

// sign(t) * exp(t^2 - shift) * D(|t|): the scaled building block for erfi
// differences with a common exp(shift) factored out.  shift >= t^2 keeps
// every intermediate below 1.
inline double erfi_scaled(double t, double shift, const EvalOptions& opt) {
  const double at = std::abs(t);
  const double d = at == 0.0 ? 0.0 : dawson(at, opt);
  double v = std::exp(at * at - shift) * d;
  return t < 0.0 ? -v : v;
}

// (erfi(a) - erfi(b)) scaled by exp(-shift), stable for large arguments.
inline double erfi_diff_scaled(double a, double b, double shift, const EvalOptions& opt) {
  return erfi_scaled(a, shift, opt) - erfi_scaled(b, shift, opt);
}

}  // namespace detail

// (erfi(a) - erfi(b)) / (erfi(b) - erfi(c)) with the dominant exp factor
// cancelled analytically, per the Dawson identity erfi(z) = (2/sqrt(pi)) e^{z^2} D(z).
// Precondition: b > c.
inline double erfi_ratio(double a, double b, double c, const EvalOptions& opt = {}) {
  if (!(b > c)) throw std::domain_error("erfi_ratio: requires b > c");
  const double m2 = std::max({a * a, b * b, c * c});
  const double num = detail::erfi_diff_scaled(a, b, m2, opt);
  const double den = detail::erfi_diff_scaled(b, c, m2, opt);
  return num / den;
}

// Allied form used by the exit-side probabilities:
//   (erfi(hi) - erfi(x)) / (erfi(hi) - erfi(lo)),  hi > lo, x in [lo, hi].
inline double erfi_interval_ratio(double hi, double x, double lo,
                                  const EvalOptions& opt = {}) {
  if (!(hi > lo)) throw std::domain_error("erfi_interval_ratio: requires hi > lo");
  const double m2 = std::max({hi * hi, x * x, lo * lo});
  const double num = detail::erfi_diff_scaled(hi, x, m2, opt);
  const double den = detail::erfi_diff_scaled(hi, lo, m2, opt);
  return num / den;
}

// 2F2({1,1};{3/2,2}; x) = sum_k k! / ((3/2)_k (2)_k) x^k.  Entire, positive
// and increasing for x >= 0 (the only arguments the model produces).
inline double hyp2f2_11_32(double x, const EvalOptions& opt = {}) {
  if (!(x >= 0.0)) throw std::invalid_argument("hyp2f2_11_32: requires x >= 0");
  double term = 1.0;
  double sum = 1.0;
  double comp = 0.0;
  for (int k = 0; k < opt.max_terms; ++k) {
    term *= (k + 1.0) * x / ((k + 1.5) * (k + 2.0));
    double y = term - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    if (term < opt.rel_tol * sum) return sum;
  }
  throw numerical_error("hyp2f2_11_32: series did not converge");
}

namespace detail {

// Same series accumulated in double-double; the expected-exit-time
// combination needs the extra digits because its terms cancel to O(1)
// from magnitudes of order exp(omega z^2).
inline DD hyp2f2_11_32_dd(double x, const EvalOptions& opt = {}) {
  if (!(x >= 0.0)) throw std::invalid_argument("hyp2f2_11_32: requires x >= 0");
  DD term(1.0);
  DD sum(1.0);
  for (int k = 0; k < opt.max_terms; ++k) {
    term = dd_mul(term, (k + 1.0) * x / ((k + 1.5) * (k + 2.0)));
    sum = dd_add(sum, term);
    if (std::abs(term.hi) < 1e-33 * std::abs(sum.hi)) return sum;
  }
  throw numerical_error("hyp2f2_11_32: series did not converge");
}

// erfi in double-double (series path; |z| <= ~26).
inline DD erfi_dd(double z, const EvalOptions& opt = {}) {
  const double az = std::abs(z);
  if (az == 0.0) return DD(z);
  DD v = dd_mul(erfi_series_core_dd(az, opt), two_over_sqrt_pi);
  if (z < 0.0) v = DD(-v.hi, -v.lo);
  return v;
}

}  // namespace detail

inline double norm_pdf(double x) {
  static constexpr double inv_sqrt_2pi = 0.3989422804014326779399461;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double norm_cdf(double x) {
  static constexpr double inv_sqrt_2 = 0.7071067811865475244008444;
  return 0.5 * std::erfc(-x * inv_sqrt_2);
}

// Inverse standard normal cdf (Acklam's rational approximation refined by
// one Halley step; ~1e-15 absolute error).
inline double norm_ppf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("norm_ppf: p must be in (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement
  double e = norm_cdf(x) - p;
  double u = e * std::sqrt(2.0 * 3.14159265358979323846) * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

}  // namespace evpix

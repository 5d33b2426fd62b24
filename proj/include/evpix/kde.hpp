#pragma once

// Gaussian kernel density estimation on a fixed 512-point grid, with
// Silverman's bandwidth when none is given.  Samples are linearly binned
// and the kernel applied over the binned weights, which keeps the cost
// independent of the sample count.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "evpix/special_functions.hpp"

namespace evpix {

struct KdeCurve {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;

  double max_value() const {
    double m = 0.0;
    for (double v : density) m = std::max(m, v);
    return m;
  }

  // trapezoid mass over the grid
  double mass() const {
    double s = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i)
      s += 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
    return s;
  }
};

inline double silverman_bandwidth(std::span<const double> samples) {
  const std::size_t n = samples.size();
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : samples) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n - 1);
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const auto quantile = [&](double q) {
    double pos = q * static_cast<double>(n - 1);
    std::size_t i = static_cast<std::size_t>(pos);
    double w = pos - static_cast<double>(i);
    return (1.0 - w) * sorted[i] + w * sorted[std::min(i + 1, n - 1)];
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  double spread = std::sqrt(var);
  if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
  // roundoff-scale spread means the sample is effectively constant
  if (spread < 1e-12 * std::max(1.0, std::abs(mean))) return 0.0;
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

inline KdeCurve kde(std::span<const double> samples, double bandwidth = 0.0,
                    std::size_t grid_points = 512) {
  if (samples.size() < 100 && bandwidth <= 0.0)
    throw std::invalid_argument("kde: need at least 100 samples");
  if (samples.empty()) throw std::invalid_argument("kde: empty sample");

  double h = bandwidth;
  if (h <= 0.0) {
    h = silverman_bandwidth(samples);
    if (!(h > 0.0))
      throw std::invalid_argument("kde: degenerate sample (zero spread) and no bandwidth");
  }

  auto [mn_it, mx_it] = std::minmax_element(samples.begin(), samples.end());
  // 5 bandwidths of margin keep the truncated kernel mass below 1e-6 even
  // for edge-concentrated samples
  const double lo = *mn_it - 5.0 * h;
  const double hi = *mx_it + 5.0 * h;

  KdeCurve out;
  out.bandwidth = h;
  out.grid.resize(grid_points);
  const double dx = (hi - lo) / static_cast<double>(grid_points - 1);
  for (std::size_t i = 0; i < grid_points; ++i)
    out.grid[i] = lo + dx * static_cast<double>(i);

  // linear binning onto the grid
  std::vector<double> w(grid_points, 0.0);
  for (double v : samples) {
    double s = (v - lo) / dx;
    std::size_t i = static_cast<std::size_t>(std::clamp(s, 0.0, static_cast<double>(grid_points - 2)));
    double f = s - static_cast<double>(i);
    w[i] += 1.0 - f;
    w[i + 1] += f;
  }

  const int reach = static_cast<int>(std::ceil(5.0 * h / dx));
  std::vector<double> kernel(reach + 1);
  const double norm = 1.0 / (static_cast<double>(samples.size()) * h);
  for (int j = 0; j <= reach; ++j)
    kernel[j] = norm_pdf(static_cast<double>(j) * dx / h) * norm;

  out.density.assign(grid_points, 0.0);
  const int np = static_cast<int>(grid_points);
  for (int i = 0; i < np; ++i) {
    if (w[i] == 0.0) continue;
    const int j0 = std::max(0, i - reach);
    const int j1 = std::min(np - 1, i + reach);
    const double wi = w[i];
    for (int j = j0; j <= j1; ++j) out.density[j] += wi * kernel[std::abs(j - i)];
  }
  return out;
}

// sup-norm distance between two curves, each evaluated on its own grid and
// compared on the union via linear interpolation
inline double kde_sup_distance(const KdeCurve& a, const KdeCurve& b) {
  auto eval = [](const KdeCurve& c, double x) {
    if (x <= c.grid.front() || x >= c.grid.back()) return 0.0;
    std::size_t i = static_cast<std::size_t>(
        std::upper_bound(c.grid.begin(), c.grid.end(), x) - c.grid.begin()) - 1;
    double w = (x - c.grid[i]) / (c.grid[i + 1] - c.grid[i]);
    return (1.0 - w) * c.density[i] + w * c.density[i + 1];
  };
  double d = 0.0;
  for (std::size_t i = 0; i < a.grid.size(); ++i)
    d = std::max(d, std::abs(a.density[i] - eval(b, a.grid[i])));
  for (std::size_t i = 0; i < b.grid.size(); ++i)
    d = std::max(d, std::abs(eval(a, b.grid[i]) - b.density[i]));
  return d;
}

}  // namespace evpix

#pragma once

// Statistical post-processing of event streams: ISI histograms segregated by
// polarity-transition class, summary statistics, and their serializations.

#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "evpix/event_stream.hpp"

namespace evpix {

enum class PairClass { OnToOff = 0, OffToOn = 1, OnToOn = 2, OffToOff = 3 };

inline const char* to_string(PairClass c) {
  switch (c) {
    case PairClass::OnToOff: return "on_to_off";
    case PairClass::OffToOn: return "off_to_on";
    case PairClass::OnToOn: return "on_to_on";
    default: return "off_to_off";
  }
}

inline PairClass classify_pair(Polarity prev, Polarity next) {
  if (prev == Polarity::On)
    return next == Polarity::Off ? PairClass::OnToOff : PairClass::OnToOn;
  return next == Polarity::On ? PairClass::OffToOn : PairClass::OffToOff;
}

struct IsiHistograms {
  std::vector<double> bin_edges;  // log-spaced, seconds
  std::array<std::vector<std::size_t>, 4> counts;  // indexed by PairClass

  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& c : counts)
      for (std::size_t v : c) t += v;
    return t;
  }

  // index of the fullest bin for one class; SIZE_MAX when the class is empty
  std::size_t modal_bin(PairClass c) const {
    const auto& v = counts[static_cast<int>(c)];
    std::size_t best = SIZE_MAX, best_count = 0;
    for (std::size_t i = 0; i < v.size(); ++i)
      if (v[i] > best_count) {
        best_count = v[i];
        best = i;
      }
    return best;
  }

  double bin_center(std::size_t i) const {
    return std::sqrt(bin_edges[i] * bin_edges[i + 1]);  // geometric center
  }
};

inline IsiHistograms isi_histograms(const EventStream& s, std::size_t bins_per_decade = 10) {
  if (s.events.size() < 2)
    throw std::invalid_argument("isi_histograms: need at least 2 events");
  if (bins_per_decade < 1)
    throw std::invalid_argument("isi_histograms: bins_per_decade must be >= 1");

  double isi_min = std::numeric_limits<double>::infinity();
  double isi_max = 0.0;
  for (std::size_t i = 1; i < s.events.size(); ++i) {
    isi_min = std::min(isi_min, s.events[i].isi);
    isi_max = std::max(isi_max, s.events[i].isi);
  }
  double lo = s.params.rho > 0.0 ? s.params.rho : isi_min;
  lo = std::min(lo, isi_min);
  if (!(lo > 0.0)) lo = std::max(isi_min, 1e-12);

  const double step = 1.0 / static_cast<double>(bins_per_decade);
  const double log_lo = std::floor(std::log10(lo) / step) * step;
  std::size_t nbins = 1;
  while (log_lo + static_cast<double>(nbins) * step < std::log10(isi_max) + step / 2)
    ++nbins;

  IsiHistograms h;
  h.bin_edges.resize(nbins + 1);
  for (std::size_t i = 0; i <= nbins; ++i)
    h.bin_edges[i] = std::pow(10.0, log_lo + static_cast<double>(i) * step);
  for (auto& c : h.counts) c.assign(nbins, 0);

  for (std::size_t i = 1; i < s.events.size(); ++i) {
    const PairClass c = classify_pair(s.events[i - 1].polarity, s.events[i].polarity);
    const double isi = s.events[i].isi;
    double pos = (std::log10(isi) - log_lo) / step;
    std::size_t bin = static_cast<std::size_t>(
        std::clamp(pos, 0.0, static_cast<double>(nbins - 1)));
    ++h.counts[static_cast<int>(c)][bin];
  }
  return h;
}

inline void write_isi_histograms_csv(std::ostream& os, const IsiHistograms& h) {
  os << "class,bin_left_s,bin_right_s,count\n";
  char buf[160];
  for (int c = 0; c < 4; ++c) {
    for (std::size_t i = 0; i + 1 < h.bin_edges.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%zu\n",
                    to_string(static_cast<PairClass>(c)), h.bin_edges[i],
                    h.bin_edges[i + 1], h.counts[c][i]);
      os << buf;
    }
  }
}

struct SummaryTable {
  std::size_t n_events = 0;
  double record_time_s = 0.0;
  double p_on = 0.0;
  double p_off = 0.0;
  // forward transitions P(E_n = to | E_{n-1} = from)
  double p_on_to_off = 0.0;
  double p_off_to_on = 0.0;
  double p_on_to_on = 0.0;
  double p_off_to_off = 0.0;
  // reversed conditionals P(E_{n-1} = from | E_n = to); these are the
  // quantities the published summary table reports for the cross transitions
  double p_rev_on_to_off = 0.0;
  double p_rev_off_to_on = 0.0;
  double p_opposite_pairs = 0.0;
  double r_total = 0.0;
  double r_on = 0.0;
  double r_off = 0.0;
};

inline SummaryTable summarize(const EventStream& s) {
  if (s.events.size() < 2) throw std::invalid_argument("summarize: need at least 2 events");
  SummaryTable t;
  t.n_events = s.events.size();
  t.record_time_s = s.events.back().timestamp;
  std::size_t n_on = 0;
  for (const Event& e : s.events)
    if (e.polarity == Polarity::On) ++n_on;
  t.p_on = static_cast<double>(n_on) / static_cast<double>(t.n_events);
  t.p_off = 1.0 - t.p_on;

  std::size_t pair_counts[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 1; i < s.events.size(); ++i) {
    ++pair_counts[static_cast<int>(s.events[i - 1].polarity)]
                 [static_cast<int>(s.events[i].polarity)];
  }
  const auto on = static_cast<int>(Polarity::On);
  const auto off = static_cast<int>(Polarity::Off);
  const double from_on = static_cast<double>(pair_counts[on][on] + pair_counts[on][off]);
  const double from_off = static_cast<double>(pair_counts[off][on] + pair_counts[off][off]);
  const double to_on = static_cast<double>(pair_counts[on][on] + pair_counts[off][on]);
  const double to_off = static_cast<double>(pair_counts[on][off] + pair_counts[off][off]);
  if (from_on > 0) {
    t.p_on_to_off = pair_counts[on][off] / from_on;
    t.p_on_to_on = pair_counts[on][on] / from_on;
  }
  if (from_off > 0) {
    t.p_off_to_on = pair_counts[off][on] / from_off;
    t.p_off_to_off = pair_counts[off][off] / from_off;
  }
  if (to_off > 0) t.p_rev_on_to_off = pair_counts[on][off] / to_off;
  if (to_on > 0) t.p_rev_off_to_on = pair_counts[off][on] / to_on;
  const double pairs = from_on + from_off;
  t.p_opposite_pairs =
      (pair_counts[on][off] + pair_counts[off][on]) / pairs;
  t.r_total = static_cast<double>(t.n_events) / t.record_time_s;
  t.r_on = t.p_on * t.r_total;
  t.r_off = t.p_off * t.r_total;
  return t;
}

// fixed three-decimal rendering, matching the published table's precision
inline void write_summary_text(std::ostream& os, const SummaryTable& t) {
  char buf[128];
  auto row = [&](const char* label, const char* value) {
    std::snprintf(buf, sizeof buf, "%-58s %s\n", label, value);
    os << buf;
  };
  auto num = [&](const char* label, double v, const char* unit) {
    char val[64];
    std::snprintf(val, sizeof val, "%.3f %s", v, unit);
    row(label, val);
  };
  os << "Event stream summary statistics\n";
  char val[64];
  std::snprintf(val, sizeof val, "%zu (obs.)", t.n_events);
  row("number of events, N", val);
  std::snprintf(val, sizeof val, "%.2f (weeks)", t.record_time_s / 604800.0);
  row("record time, T_N", val);
  num("on event probability, P(E_n = on)", t.p_on, "(-)");
  num("off event probability, P(E_n = off)", t.p_off, "(-)");
  num("on-to-off event probability, P(E_n=off | E_{n-1}=on)", t.p_on_to_off, "(-)");
  num("off-to-on event probability, P(E_n=on | E_{n-1}=off)", t.p_off_to_on, "(-)");
  num("on-to-on event probability, P(E_n=on | E_{n-1}=on)", t.p_on_to_on, "(-)");
  num("off-to-off event probability, P(E_n=off | E_{n-1}=off)", t.p_off_to_off, "(-)");
  num("reversed on-to-off, P(E_{n-1}=on | E_n=off)", t.p_rev_on_to_off, "(-)");
  num("reversed off-to-on, P(E_{n-1}=off | E_n=on)", t.p_rev_off_to_on, "(-)");
  num("probability of opposite polarity pairs", t.p_opposite_pairs, "(-)");
  num("total event rate, r_total", t.r_total, "(ev/s)");
  num("on event rate, r_on", t.r_on, "(ev/s)");
  num("off event rate, r_off", t.r_off, "(ev/s)");
}

inline void write_summary_json(std::ostream& os, const SummaryTable& t) {
  char buf[1024];
  std::snprintf(buf, sizeof buf,
                "{\n"
                "  \"n_events\": %zu,\n"
                "  \"record_time_s\": %.17g,\n"
                "  \"p_on\": %.17g,\n"
                "  \"p_off\": %.17g,\n"
                "  \"p_on_to_off\": %.17g,\n"
                "  \"p_off_to_on\": %.17g,\n"
                "  \"p_on_to_on\": %.17g,\n"
                "  \"p_off_to_off\": %.17g,\n"
                "  \"p_rev_on_to_off\": %.17g,\n"
                "  \"p_rev_off_to_on\": %.17g,\n"
                "  \"p_opposite_pairs\": %.17g,\n"
                "  \"r_total_ev_s\": %.17g,\n"
                "  \"r_on_ev_s\": %.17g,\n"
                "  \"r_off_ev_s\": %.17g\n"
                "}\n",
                t.n_events, t.record_time_s, t.p_on, t.p_off, t.p_on_to_off,
                t.p_off_to_on, t.p_on_to_on, t.p_off_to_off, t.p_rev_on_to_off,
                t.p_rev_off_to_on, t.p_opposite_pairs, t.r_total, t.r_on, t.r_off);
  os << buf;
}

}  // namespace evpix

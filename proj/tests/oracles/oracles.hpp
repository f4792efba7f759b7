#pragma once

// Independent reference implementations used by the tests. They work offline over whole
// inputs and favour obviousness over speed; none of them calls into bls_core logic.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <set>
#include <utility>
#include <vector>

namespace oracle {

struct Push {
  std::int64_t start_ts = 0;
  std::int64_t end_ts = 0;
  double depth = 0.0;
  bool released = false;
};

inline double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Two-pass segmentation: find every excursion below baseline - threshold (it ends at the
// first later sample strictly above that level), then look for a return to within
// `tolerance` of the baseline between the end of each excursion and the next start.
inline std::vector<Push> segment(const std::vector<std::int64_t>& ts, const std::vector<double>& d, double baseline,
                                 double threshold, double tolerance) {
  const double level = baseline - threshold;
  std::vector<std::pair<std::size_t, std::size_t>> spans;  // [start, end] sample indices
  std::size_t i = 0;
  while (i < d.size()) {
    if (!(d[i] < level)) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < d.size() && !(d[j] > level)) ++j;
    if (j == d.size()) break;  // never came back up: not a finished push
    spans.emplace_back(i, j);
    i = j + 1;
  }
  std::vector<Push> out;
  for (std::size_t k = 0; k < spans.size(); ++k) {
    const auto [s, e] = spans[k];
    Push p;
    p.start_ts = ts[s];
    p.end_ts = ts[e];
    p.depth = baseline - *std::min_element(d.begin() + static_cast<std::ptrdiff_t>(s),
                                           d.begin() + static_cast<std::ptrdiff_t>(e));
    const std::size_t next = k + 1 < spans.size() ? spans[k + 1].first : d.size();
    for (std::size_t q = e; q < next; ++q) {
      if (d[q] >= baseline - tolerance) p.released = true;
    }
    out.push_back(p);
  }
  return out;
}

// Mean of 60000 / Δ over consecutive push starts.
inline std::optional<double> average_rate(const std::vector<Push>& pushes) {
  if (pushes.size() < 2) return std::nullopt;
  std::vector<double> rates;
  for (std::size_t k = 1; k < pushes.size(); ++k) {
    rates.push_back(60000.0 / static_cast<double>(pushes[k].start_ts - pushes[k - 1].start_ts));
  }
  return mean(rates);
}

inline std::optional<double> trailing_mean(const std::vector<double>& values, std::size_t window) {
  if (values.empty()) return std::nullopt;
  const std::size_t n = std::min(window, values.size());
  double sum = 0.0;
  for (std::size_t k = values.size() - n; k < values.size(); ++k) sum += values[k];
  return sum / static_cast<double>(n);
}

// For every sample: the minimum from the last sample at or before ts - hold up to the
// sample itself. The result is the best such minimum; nullopt if no sample qualifies.
inline std::optional<double> sustained_max(const std::vector<std::int64_t>& ts, const std::vector<double>& v,
                                           std::int64_t hold) {
  std::optional<double> best;
  for (std::size_t k = 0; k < v.size(); ++k) {
    std::optional<std::size_t> from;
    for (std::size_t b = 0; b <= k; ++b) {
      if (ts[b] <= ts[k] - hold) from = b;
    }
    if (!from) continue;
    double m = v[*from];
    for (std::size_t q = *from; q <= k; ++q) m = std::min(m, v[q]);
    best = best ? std::max(*best, m) : m;
  }
  return best;
}

// Executed sequence given as node indices; edges as (from, to) pairs.
inline double order_fraction(const std::vector<int>& executed, const std::set<std::pair<int, int>>& edges, int start,
                             int task_count) {
  int hits = 0;
  for (std::size_t k = 0; k < executed.size(); ++k) {
    if (k == 0) {
      hits += executed[0] == start ? 1 : 0;
    } else {
      hits += edges.count({executed[k - 1], executed[k]}) ? 1 : 0;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(task_count);
}

// The published score table, row by row; PerformCompressions at its 4-point maximum and the
// AED pad row counted for both pads.
inline constexpr int kPublishedTaskMaxima[] = {2, 1, 1, 2, 2, 4, 2, 1 + 1, 1, 1};

inline int published_max_score() {
  int total = 0;
  for (int v : kPublishedTaskMaxima) total += v;
  return total;
}

// Open intervals of the published bands, with exact boundaries going to the better adjacent band.
inline int published_rate_points(double r) {
  if (r >= 95.0 && r <= 125.0) return 2;
  if ((r >= 80.0 && r < 95.0) || (r > 125.0 && r <= 140.0)) return 1;
  return 0;
}

inline int published_depth_points(double d) { return (d >= 5.0 && d <= 6.0) ? 2 : 0; }

}  // namespace oracle

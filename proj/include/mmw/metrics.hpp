#pragma once

// Evaluation metrics: proportional fairness, geometric-mean rate, chordal
// distance between selected users' channels, CDFs and timing percentiles.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "mmw/common.hpp"

namespace mmw {

/// sum_i ln R_i (nats).
inline double proportional_fairness(std::span<const double> cumulative_rates) {
  double pf = 0.0;
  for (double r : cumulative_rates) {
    if (!(r > 0.0)) throw std::domain_error("proportional_fairness: cumulative rate must be > 0");
    pf += std::log(r);
  }
  return pf;
}

/// (prod_i R_i)^(1/I), computed in the log domain.
inline double geometric_mean_rate(std::span<const double> cumulative_rates) {
  if (cumulative_rates.empty()) throw std::domain_error("geometric_mean_rate: no users");
  return std::exp(proportional_fairness(cumulative_rates) /
                  static_cast<double>(cumulative_rates.size()));
}

/// min over pairs of sqrt(1 - |h_i^H h_j|^2 / (|h_i|^2 |h_j|^2)); 1 when
/// fewer than two users are selected. `channels` holds h_i as column i.
inline double min_chordal_distance(const CMatrix& channels, std::span<const int> users) {
  for (int i : users) {
    if (i < 0 || i >= channels.cols()) throw std::out_of_range("min_chordal_distance: bad user index");
    if (!(channels.col(i).squaredNorm() > 0.0)) {
      throw std::domain_error("min_chordal_distance: zero-norm channel");
    }
  }
  double best = 1.0;
  for (std::size_t a = 0; a < users.size(); ++a) {
    const auto ha = channels.col(users[a]);
    for (std::size_t b = a + 1; b < users.size(); ++b) {
      const auto hb = channels.col(users[b]);
      const double cos2 = std::norm(ha.dot(hb)) / (ha.squaredNorm() * hb.squaredNorm());
      best = std::min(best, std::sqrt(std::max(0.0, 1.0 - cos2)));
    }
  }
  return best;
}

struct CdfPoint {
  double value = 0.0;
  double percentile = 0.0;  // in (0, 1]
};

/// Empirical CDF: the k-th smallest value (1-based) gets percentile k/n.
inline std::vector<CdfPoint> rate_cdf(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("rate_cdf: need at least one value");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<CdfPoint> out;
  out.reserve(sorted.size());
  const double n = static_cast<double>(sorted.size());
  for (std::size_t k = 0; k < sorted.size(); ++k) out.push_back({sorted[k], (k + 1) / n});
  return out;
}

/// Linear-interpolated percentile (q in [0,1]) of an unsorted sample.
inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

/// One row per episode.
struct EpisodeMetrics {
  std::size_t episode = 0;
  double pf = 0.0;        // nats
  double geo_mean = 0.0;  // bits/s/Hz
  double mean_selected = 0.0;
  double mean_min_chordal = 0.0;
  double median_slot_time_us = 0.0;
};

struct MetricReport {
  std::string scheduler;
  std::vector<EpisodeMetrics> episodes;
  std::vector<double> slot_times_us;

  double mean_pf = 0.0;
  double mean_geo_mean = 0.0;
  double mean_selected = 0.0;
  double mean_min_chordal = 0.0;
  double time_p50_us = 0.0;
  double time_p90_us = 0.0;
  double time_p99_us = 0.0;

  void finalize() {
    std::vector<double> pf, geo, sel, chord;
    for (const auto& e : episodes) {
      pf.push_back(e.pf);
      geo.push_back(e.geo_mean);
      sel.push_back(e.mean_selected);
      chord.push_back(e.mean_min_chordal);
    }
    mean_pf = mean(pf);
    mean_geo_mean = mean(geo);
    mean_selected = mean(sel);
    mean_min_chordal = mean(chord);
    time_p50_us = percentile(slot_times_us, 0.5);
    time_p90_us = percentile(slot_times_us, 0.9);
    time_p99_us = percentile(slot_times_us, 0.99);
  }

  [[nodiscard]] std::vector<double> geo_means() const {
    std::vector<double> out;
    for (const auto& e : episodes) out.push_back(e.geo_mean);
    return out;
  }
  [[nodiscard]] std::vector<double> pfs() const {
    std::vector<double> out;
    for (const auto& e : episodes) out.push_back(e.pf);
    return out;
  }
};

}  // namespace mmw

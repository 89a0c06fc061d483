#pragma once

// Two-timescale episode driver.
//
// Slot t (1-based):
//   1. if t == 1, N_s + 1, 2 N_s + 1, ...: beam sweep, each user picks its best
//      codebook beam, held for the rest of the long block
//   2. effective channels u_ij = h_i^H f*_RF,j
//   3. user selection + ZF (timed)
//   4. rates, EMA update R_i, weights w_i = 1 / R_i
// then the channel advances one short block (plus a long-block refresh at
// the boundary).

#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mmw/channel.hpp"
#include "mmw/codebook.hpp"
#include "mmw/config.hpp"
#include "mmw/metrics.hpp"
#include "mmw/precoder.hpp"
#include "mmw/schedulers.hpp"

namespace mmw {

/// R(t) = (1 - delta) R(t-1) + delta r(t).
inline double update_cumulative_rate(double previous, double rate, double delta) {
  return (1.0 - delta) * previous + delta * rate;
}

/// Runs one scheduling decision and measures its wall-clock time in
/// microseconds (selection + ZF only).
inline std::pair<SelectionResult, double> slot_timing(const NamedScheduler& scheduler,
                                                      const SchedulerContext& ctx) {
  const auto start = std::chrono::steady_clock::now();
  SelectionResult r = scheduler.select(ctx);
  const auto stop = std::chrono::steady_clock::now();
  return {std::move(r), std::chrono::duration<double, std::micro>(stop - start).count()};
}

struct SlotRecord {
  int t = 0;
  bool beam_sweep = false;
  std::vector<int> selected;
  bool feasible = true;
  double q = 0.0;
  std::vector<double> weights;
  std::vector<double> rates;
  double slot_time_us = 0.0;
  double min_chordal = 1.0;
};

struct EpisodeTrace {
  std::size_t episode = 0;
  std::string scheduler;
  int beam_sweeps = 0;
  std::vector<double> final_rates;  // R_i(T)
  std::vector<double> slot_times_us;
  std::vector<int> served_per_slot;
  std::vector<double> min_chordal_per_slot;
  std::vector<SlotRecord> slots;  // only with EpisodeOptions::keep_slots

  [[nodiscard]] EpisodeMetrics metrics() const {
    EpisodeMetrics m;
    m.episode = episode;
    m.pf = proportional_fairness(final_rates);
    m.geo_mean = geometric_mean_rate(final_rates);
    double sel = 0.0;
    for (int s : served_per_slot) sel += s;
    m.mean_selected = served_per_slot.empty() ? 0.0 : sel / static_cast<double>(served_per_slot.size());
    m.mean_min_chordal = mean(min_chordal_per_slot);
    m.median_slot_time_us = percentile(slot_times_us, 0.5);
    return m;
  }
};

/// What an observer sees after Step 3 of every slot.
struct SlotObservation {
  std::size_t episode;
  int t;
  const ChannelState& channel;
  const BeamAssignment& beams;
  const SchedulerContext& context;
  const SelectionResult& result;
};

using SlotObserver = std::function<void(const SlotObservation&)>;

struct EpisodeOptions {
  bool keep_slots = false;
  SlotObserver observer;
};

inline EpisodeTrace run_episode(std::uint64_t seed, const SystemConfig& cfg, const Codebook& codebook,
                                const NamedScheduler& scheduler, std::size_t episode_index = 0,
                                const EpisodeOptions& options = {}) {
  cfg.validate();
  if (codebook.beams.rows() != cfg.num_antennas()) {
    throw ConfigError("codebook does not match the array size");
  }
  const int n = cfg.num_users;
  ChannelState channel = generate_episode(seed, cfg);
  BeamAssignment beams;
  std::vector<double> cumulative(static_cast<std::size_t>(n), 1.0);

  EpisodeTrace trace;
  trace.episode = episode_index;
  trace.scheduler = scheduler.name;
  trace.slot_times_us.reserve(static_cast<std::size_t>(cfg.slots_per_episode));

  for (int t = 1; t <= cfg.slots_per_episode; ++t) {
    const bool sweep = (t - 1) % cfg.slots_per_long_block == 0;
    if (sweep) {
      beams = sweep_assignments(channel, codebook);
      ++trace.beam_sweeps;
    }
    const CMatrix h = channel.channel_matrix();
    std::vector<double> weights(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) weights[i] = 1.0 / cumulative[i];

    const SchedulerContext ctx =
        make_context(measure_effective_channels(h, beams, cfg.noise_power_w, cfg.tx_power_w), beams,
                     weights, cfg.max_selected, cfg.num_rf_chains);

    std::pair<SelectionResult, double> timed;
    try {
      timed = slot_timing(scheduler, ctx);
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << "scheduler '" << scheduler.name << "' failed at episode " << episode_index << ", slot "
         << t << ": " << e.what();
      throw std::runtime_error(os.str());
    }
    const SelectionResult& result = timed.first;

    if (static_cast<int>(result.selected.size()) > cfg.max_selected) {
      throw std::logic_error("scheduler '" + scheduler.name + "' exceeded max_selected");
    }
    double q_check = 0.0;
    for (int i = 0; i < n; ++i) q_check += weights[i] * result.rates[i];
    if (std::abs(q_check - result.q) > 1e-12 * std::max(1.0, std::abs(q_check))) {
      throw std::logic_error("scheduler '" + scheduler.name + "' reported Q inconsistent with its rates");
    }

    if (options.observer) options.observer({episode_index, t, channel, beams, ctx, result});

    const double chordal = result.served() >= 2 ? min_chordal_distance(h, result.selected) : 1.0;
    trace.slot_times_us.push_back(timed.second);
    trace.served_per_slot.push_back(result.served());
    trace.min_chordal_per_slot.push_back(chordal);
    if (options.keep_slots) {
      trace.slots.push_back({t, sweep, result.selected, result.feasible, result.q, weights,
                             result.rates, timed.second, chordal});
    }

    for (int i = 0; i < n; ++i) {
      cumulative[i] = update_cumulative_rate(cumulative[i], result.rates[i], cfg.ema_delta);
    }

    if (t < cfg.slots_per_episode) {
      channel = advance_short_block(std::move(channel), cfg.short_block_s);
      if (t % cfg.slots_per_long_block == 0) channel = advance_long_block(std::move(channel));
    }
  }
  trace.final_rates = std::move(cumulative);
  return trace;
}

inline EpisodeTrace run_episode(std::uint64_t seed, const SystemConfig& cfg,
                                const NamedScheduler& scheduler) {
  return run_episode(seed, cfg, build_grid_codebook(cfg), scheduler);
}

}  // namespace mmw

#pragma once

// Shared fixtures for the unit tests: random scheduling instances and small
// configs.

#include <random>
#include <vector>

#include "mmw/codebook.hpp"
#include "mmw/config.hpp"
#include "mmw/schedulers.hpp"

namespace mmw::fixtures {

/// Random unit-norm columns, one per user.
inline CMatrix random_unit_columns(Rng& rng, int rows, int cols) {
  CMatrix m(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) m(r, c) = complex_gaussian(rng, 1.0);
    m.col(c).normalize();
  }
  return m;
}

/// A scheduling instance built the way the protocol builds one: random
/// channels h_i, random analog beams, u = H^H F.
struct Instance {
  CMatrix h;       // N x I
  CMatrix analog;  // N x I
  SchedulerContext ctx;
};

inline Instance random_instance(std::uint64_t seed, int users, int max_selected, int antennas = 16,
                                double power = 2.0, double noise = 1e-3) {
  Rng rng(seed);
  Instance inst;
  inst.h.resize(antennas, users);
  std::uniform_real_distribution<double> gain(0.2, 2.0);
  for (int i = 0; i < users; ++i) {
    for (int n = 0; n < antennas; ++n) inst.h(n, i) = complex_gaussian(rng, gain(rng));
  }
  inst.analog = random_unit_columns(rng, antennas, users);
  BeamAssignment beams;
  beams.analog = inst.analog;
  for (int i = 0; i < users; ++i) beams.beam_index.push_back(i);
  std::uniform_real_distribution<double> w(0.2, 3.0);
  std::vector<double> weights(static_cast<std::size_t>(users));
  for (auto& x : weights) x = w(rng);
  inst.ctx = make_context(measure_effective_channels(inst.h, beams, noise, power), beams, weights,
                          max_selected, max_selected);
  return inst;
}

/// An instance drawn from the reference channel model with swept beams and
/// weights uniform in [0.2, 5].
inline SchedulerContext channel_model_instance(std::uint64_t seed, int users, int max_selected) {
  SystemConfig cfg;
  cfg.num_users = users;
  cfg.max_selected = max_selected;
  cfg.num_rf_chains = max_selected;
  static const Codebook cb = build_grid_codebook(cfg);
  const ChannelState state = generate_episode(seed, cfg);
  const BeamAssignment beams = sweep_assignments(state, cb);
  Rng rng(seed);
  std::uniform_real_distribution<double> w(0.2, 5.0);
  std::vector<double> weights(static_cast<std::size_t>(users));
  for (auto& x : weights) x = w(rng);
  return make_context(measure_effective_channels(state, beams, cfg.noise_power_w, cfg.tx_power_w), beams, weights,
                      max_selected, max_selected);
}

/// Small, fast config for protocol-level tests.
inline SystemConfig small_config() {
  SystemConfig cfg;
  cfg.num_users = 6;
  cfg.max_selected = 3;
  cfg.num_rf_chains = 3;
  cfg.slots_per_episode = 12;
  cfg.slots_per_long_block = 4;
  cfg.codebook_n_az = 16;
  cfg.codebook_n_el = 4;
  return cfg;
}

}  // namespace mmw::fixtures

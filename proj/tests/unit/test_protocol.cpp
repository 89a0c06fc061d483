#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "mmw/experiment.hpp"
#include "mmw/protocol.hpp"
#include "support.hpp"

using namespace mmw;
using fixtures::small_config;

namespace {

/// Always serves user 0 alone, so everybody else starves.
NamedScheduler only_user_zero() {
  return {"only0", [](const SchedulerContext& ctx) {
            const std::vector<int> set{0};
            return zf_evaluate(ctx.channels, ctx.gram, set, ctx.weights);
          }};
}

}  // namespace

TEST(Protocol, EmaUpdateExamples) {
  EXPECT_DOUBLE_EQ(update_cumulative_rate(1.0, 0.0, 0.1), 0.9);
  EXPECT_DOUBLE_EQ(update_cumulative_rate(1.0, 5.0, 0.1), 1.4);
  EXPECT_DOUBLE_EQ(update_cumulative_rate(2.0, 3.0, 0.0), 2.0);
  EXPECT_DOUBLE_EQ(update_cumulative_rate(2.0, 3.0, 1.0), 3.0);
}

TEST(Protocol, BeamSweepsAtLongBlockStarts) {
  auto cfg = small_config();
  cfg.slots_per_episode = 120;
  cfg.slots_per_long_block = 40;
  const Codebook cb = build_grid_codebook(cfg);
  std::vector<int> sweeps;
  EpisodeOptions opts;
  opts.keep_slots = true;
  const auto trace = run_episode(7, cfg, cb, builtin_scheduler("top1"), 0, opts);
  EXPECT_EQ(trace.beam_sweeps, 3);
  for (const auto& s : trace.slots) {
    if (s.beam_sweep) sweeps.push_back(s.t);
  }
  EXPECT_EQ(sweeps, (std::vector<int>{1, 41, 81}));
}

TEST(Protocol, AnalogBeamsConstantWithinLongBlock) {
  const auto cfg = small_config();  // N_s = 4, T = 12
  const Codebook cb = build_grid_codebook(cfg);
  std::vector<std::vector<int>> beams;
  std::vector<CMatrix> analog;
  EpisodeOptions opts;
  opts.observer = [&](const SlotObservation& o) {
    beams.push_back(o.beams.beam_index);
    analog.push_back(o.beams.analog);
    // Beams come from the sweep at the block start, checked against the
    // channel at that time.
    if ((o.t - 1) % cfg.slots_per_long_block == 0) {
      EXPECT_EQ(o.beams.beam_index, sweep_assignments(o.channel, cb).beam_index);
    }
  };
  run_episode(3, cfg, cb, builtin_scheduler("greedy"), 0, opts);
  ASSERT_EQ(beams.size(), 12u);
  for (int t = 0; t < 12; ++t) {
    if (t % 4 != 0) {
      EXPECT_EQ(beams[t], beams[t - 1]);
      EXPECT_EQ(analog[t], analog[t - 1]);
    }
  }
}

TEST(Protocol, WeightsAreInverseCumulativeRates) {
  Rng rng(1);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto cfg = small_config();
    cfg.ema_delta = std::uniform_real_distribution<double>(0.01, 0.5)(rng);
    EpisodeOptions opts;
    opts.keep_slots = true;
    const auto trace = run_episode(seed, cfg, build_grid_codebook(cfg), builtin_scheduler("greedy"), 0, opts);
    std::vector<double> r(static_cast<std::size_t>(cfg.num_users), 1.0);
    for (const auto& s : trace.slots) {
      for (int i = 0; i < cfg.num_users; ++i) {
        EXPECT_NEAR(s.weights[i] * r[i], 1.0, 1e-12);
        r[i] = (1.0 - cfg.ema_delta) * r[i] + cfg.ema_delta * s.rates[i];
      }
      double q = 0.0;
      for (int i = 0; i < cfg.num_users; ++i) q += s.weights[i] * s.rates[i];
      EXPECT_NEAR(q, s.q, 1e-12 * std::max(1.0, q));
    }
    for (int i = 0; i < cfg.num_users; ++i) EXPECT_NEAR(trace.final_rates[i], r[i], 1e-12 * r[i]);
  }
}

TEST(Protocol, StarvedUsersDecayGeometrically) {
  const auto cfg = small_config();
  EpisodeOptions opts;
  opts.keep_slots = true;
  const auto trace = run_episode(5, cfg, build_grid_codebook(cfg), only_user_zero(), 0, opts);
  const double keep = 1.0 - cfg.ema_delta;
  for (const auto& s : trace.slots) {
    for (int i = 1; i < cfg.num_users; ++i) {
      EXPECT_EQ(s.rates[i], 0.0);
      EXPECT_NEAR(s.weights[i], std::pow(keep, -(s.t - 1)), 1e-12 * s.weights[i]);
    }
  }
  for (int i = 1; i < cfg.num_users; ++i) {
    EXPECT_NEAR(trace.final_rates[i], std::pow(keep, cfg.slots_per_episode), 1e-12);
  }
  EXPECT_GT(trace.final_rates[0], 1.0);
}

TEST(Protocol, SingleUserSingleSlotClosedForm) {
  auto cfg = small_config();
  cfg.num_users = 1;
  cfg.max_selected = 1;
  cfg.num_rf_chains = 1;
  cfg.slots_per_episode = 1;
  double u00 = 0.0;
  EpisodeOptions opts;
  opts.observer = [&](const SlotObservation& o) { u00 = std::norm(o.context.channels.u(0, 0)); };
  const auto trace = run_episode(9, cfg, build_grid_codebook(cfg), builtin_scheduler("greedy"), 0, opts);
  const double rate = std::log2(1.0 + cfg.tx_power_w * u00 / cfg.noise_power_w);
  EXPECT_NEAR(trace.final_rates[0], 0.9 + 0.1 * rate, 1e-12 * trace.final_rates[0]);
  EXPECT_EQ(trace.beam_sweeps, 1);
}

TEST(Protocol, SchedulersSeeIdenticalChannels) {
  const auto cfg = small_config();
  const Codebook cb = build_grid_codebook(cfg);
  auto record = [&](const std::string& name) {
    std::vector<CMatrix> hs;
    std::vector<std::vector<int>> beams;
    EpisodeOptions opts;
    opts.observer = [&](const SlotObservation& o) {
      hs.push_back(o.channel.channel_matrix());
      beams.push_back(o.beams.beam_index);
    };
    run_episode(11, cfg, cb, builtin_scheduler(name), 0, opts);
    return std::make_pair(hs, beams);
  };
  const auto a = record("greedy");
  const auto b = record("top1");
  const auto c = record("adaptive");
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
}

TEST(Protocol, JobsDoNotChangeResults) {
  const auto cfg = small_config();
  const Codebook cb = build_grid_codebook(cfg);
  RunOptions opts;
  opts.episodes = 8;
  const auto serial = run_episodes(cfg, cb, builtin_scheduler("greedy"), opts);
  opts.jobs = 4;
  const auto parallel = run_episodes(cfg, cb, builtin_scheduler("greedy"), opts);
  ASSERT_EQ(serial.size(), parallel.size());
  for (std::size_t e = 0; e < serial.size(); ++e) {
    EXPECT_EQ(serial[e].episode, parallel[e].episode);
    EXPECT_EQ(serial[e].final_rates, parallel[e].final_rates);
    EXPECT_EQ(serial[e].served_per_slot, parallel[e].served_per_slot);
  }
}

TEST(Protocol, StreamsGiveDifferentEpisodes) {
  const auto cfg = small_config();
  EXPECT_NE(episode_seed(cfg, SeedStream::kTrain, 0), episode_seed(cfg, SeedStream::kTest, 0));
  const Codebook cb = build_grid_codebook(cfg);
  RunOptions opts;
  opts.episodes = 1;
  opts.stream = SeedStream::kTrain;
  const auto a = run_episodes(cfg, cb, builtin_scheduler("greedy"), opts);
  opts.stream = SeedStream::kTest;
  const auto b = run_episodes(cfg, cb, builtin_scheduler("greedy"), opts);
  EXPECT_NE(a[0].final_rates, b[0].final_rates);
}

TEST(Protocol, SummaryMatchesEpisodeMetrics) {
  const auto cfg = small_config();
  RunOptions opts;
  opts.episodes = 3;
  const auto traces = run_episodes(cfg, build_grid_codebook(cfg), builtin_scheduler("adaptive"), opts);
  const auto report = summarize("adaptive", traces);
  ASSERT_EQ(report.episodes.size(), 3u);
  double pf = 0.0;
  for (const auto& t : traces) pf += proportional_fairness(t.final_rates);
  EXPECT_NEAR(report.mean_pf, pf / 3.0, 1e-12);
  EXPECT_EQ(report.slot_times_us.size(), 3u * cfg.slots_per_episode);
}

TEST(Protocol, MismatchedCodebookIsConfigError) {
  const auto cfg = small_config();
  const Codebook cb = build_grid_codebook(ArrayGeometry{4, 2, 0.5, 10.0, 28e9}, 4, 2, -60, 60, -30, 30);
  EXPECT_THROW(run_episode(1, cfg, cb, builtin_scheduler("greedy")), ConfigError);
}

TEST(Protocol, SchedulerFailureNamesSlot) {
  const auto cfg = small_config();
  const NamedScheduler broken{"broken", [](const SchedulerContext&) -> SelectionResult {
                                throw std::runtime_error("boom");
                              }};
  try {
    run_episode(1, cfg, build_grid_codebook(cfg), broken, 4);
    FAIL() << "expected an exception";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("episode 4, slot 1"), std::string::npos);
  }
}

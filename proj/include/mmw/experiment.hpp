#pragma once

// Multi-episode runs with optional episode-level parallelism. Results are
// always ordered by episode index, so `jobs` never changes the output
// (timings aside).

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "mmw/protocol.hpp"

namespace mmw {

struct RunOptions {
  SeedStream stream = SeedStream::kTest;
  std::size_t first_episode = 0;
  std::size_t episodes = 1;
  int jobs = 1;
  bool keep_slots = false;
};

/// Runs `fn(index)` for index in [0, count) on up to `jobs` threads.
template <typename Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline std::uint64_t episode_seed(const SystemConfig& cfg, SeedStream stream, std::size_t episode) {
  return derive_seed(cfg.seed, stream, episode);
}

inline std::vector<EpisodeTrace> run_episodes(const SystemConfig& cfg, const Codebook& codebook,
                                              const NamedScheduler& scheduler,
                                              const RunOptions& options) {
  std::vector<EpisodeTrace> traces(options.episodes);
  EpisodeOptions ep;
  ep.keep_slots = options.keep_slots;
  parallel_for(options.episodes, options.jobs, [&](std::size_t k) {
    const std::size_t idx = options.first_episode + k;
    traces[k] = run_episode(episode_seed(cfg, options.stream, idx), cfg, codebook, scheduler, idx, ep);
  });
  return traces;
}

inline MetricReport summarize(const std::string& scheduler, const std::vector<EpisodeTrace>& traces) {
  MetricReport report;
  report.scheduler = scheduler;
  for (const auto& t : traces) {
    report.episodes.push_back(t.metrics());
    report.slot_times_us.insert(report.slot_times_us.end(), t.slot_times_us.begin(),
                                t.slot_times_us.end());
  }
  report.finalize();
  return report;
}

}  // namespace mmw

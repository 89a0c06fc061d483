#pragma once

// CSV and manifest writers shared by the CLI and the acceptance suite.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmw/config.hpp"
#include "mmw/metrics.hpp"
#include "mmw/protocol.hpp"

namespace mmw {

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << std::setprecision(10);
  return os;
}

inline void write_summary_header(std::ostream& os) {
  os << "scheduler,episodes,mean_pf_nats,mean_geo_mean_bps_hz,mean_selected,mean_min_chordal,"
        "time_p50_us,time_p90_us,time_p99_us\n";
}

inline void write_summary_row(std::ostream& os, const MetricReport& r) {
  os << r.scheduler << ',' << r.episodes.size() << ',' << r.mean_pf << ',' << r.mean_geo_mean << ','
     << r.mean_selected << ',' << r.mean_min_chordal << ',' << r.time_p50_us << ',' << r.time_p90_us
     << ',' << r.time_p99_us << '\n';
}

inline void write_episode_csv(std::ostream& os, const MetricReport& r) {
  os << "episode,scheduler,pf_nats,geo_mean_bps_hz,mean_selected,mean_min_chordal,median_slot_time_us\n";
  for (const auto& e : r.episodes) {
    os << e.episode << ',' << r.scheduler << ',' << e.pf << ',' << e.geo_mean << ',' << e.mean_selected
       << ',' << e.mean_min_chordal << ',' << e.median_slot_time_us << '\n';
  }
}

inline void write_cdf_csv(std::ostream& os, const MetricReport& r) {
  os << "geo_mean_bps_hz,percentile\n";
  const auto geo = r.geo_means();
  if (geo.empty()) return;
  for (const auto& p : rate_cdf(geo)) os << p.value << ',' << p.percentile << '\n';
}

/// One row per slot: selected ids are ';'-separated; rate summary is the
/// sum and the minimum over selected users.
inline void write_perslot_csv(std::ostream& os, const std::vector<EpisodeTrace>& traces) {
  os << "episode,t,scheduler,num_selected,selected_ids,feasible,q,sum_rate_bps_hz,min_selected_rate_bps_hz,"
        "slot_time_us\n";
  for (const auto& tr : traces) {
    for (const auto& s : tr.slots) {
      os << tr.episode << ',' << s.t << ',' << tr.scheduler << ',' << s.selected.size() << ',';
      double sum = 0.0;
      double min_rate = 0.0;
      for (std::size_t k = 0; k < s.selected.size(); ++k) {
        os << (k ? ";" : "") << s.selected[k];
        const double r = s.rates[s.selected[k]];
        sum += r;
        min_rate = k == 0 ? r : std::min(min_rate, r);
      }
      os << ',' << (s.feasible ? 1 : 0) << ',' << s.q << ',' << sum << ',' << min_rate << ','
         << s.slot_time_us << '\n';
    }
  }
}

inline void write_manifest(const std::filesystem::path& path, const SystemConfig& cfg,
                           const std::string& command, const nlohmann::json& extra = {}) {
  const std::string text = dump_config(cfg);
  std::ostringstream hash;
  hash << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(text);
  nlohmann::json m{{"command", command},
                   {"config_hash_fnv1a64", hash.str()},
                   {"seed", cfg.seed},
                   {"version", "1.0.0"},
                   {"compiler", __VERSION__},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                 "." + std::to_string(EIGEN_MINOR_VERSION)},
                   {"config", text}};
  if (!extra.is_null()) m["details"] = extra;
  auto os = open_output(path);
  os << m.dump(2) << '\n';
}

}  // namespace mmw

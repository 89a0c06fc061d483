#pragma once

// System configuration and the key-value config file format.
//
// File format: one `key = value` per line, `#` starts a comment, optional
// `[section]` headers are ignored (keys are global). A line
// `extends = other.toml` loads `other.toml` (relative to the including file)
// first, so later keys override it.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mmw/common.hpp"

namespace mmw {

/// Every simulator constant. Defaults are the reference setup:
/// 20 users, 10 RF chains, 2 W, 28 GHz, 8x2 UPA, 32x8 beam grid.
struct SystemConfig {
  // Users and power
  int num_users = 20;
  int max_selected = 10;  // N_max
  int num_rf_chains = 10;
  double tx_power_w = 2.0;
  double noise_power_w = 1e-15;
  double ema_delta = 0.1;

  // BS array
  double carrier_hz = 28e9;
  int array_nx = 8;
  int array_ny = 2;
  double element_spacing_wavelengths = 0.5;
  double downtilt_deg = 10.0;
  double bs_height_m = 7.0;

  // Codebook
  int codebook_n_az = 32;
  int codebook_n_el = 8;
  double codebook_az_min_deg = -180.0;
  double codebook_az_max_deg = 180.0;
  double codebook_el_min_deg = -30.0;
  double codebook_el_max_deg = 30.0;
  double codebook_memory_budget_bytes = 1024.0 * 1024.0 * 1024.0;

  // Users / mobility
  double cell_radius_m = 100.0;
  double min_distance_m = 10.0;
  double user_height_m = 1.5;
  double user_speed_kmh = 4.0;

  // Channel model
  int num_clusters = 3;
  int subpaths_per_cluster = 5;
  double angular_spread_deg = 5.0;
  double scatterer_elevation_spread_deg = 10.0;
  double pathloss_exponent = 2.9;
  double pathloss_intercept_db = 72.0;  // loss at 1 m
  double shadowing_std_db = 8.7;
  double short_block_s = 1e-3;
  bool evolve_gains = true;

  // Protocol
  int slots_per_long_block = 40;  // N_s
  int slots_per_episode = 120;    // T

  // Experiment
  int train_episodes = 500;  // N_e
  int test_episodes = 200;
  std::uint64_t seed = 1;
  double exhaustive_cap = 2e6;
  int jobs = 1;
  std::string output_dir = "out";

  // Learned selector
  std::string ml_inputs = "W+C(W)";
  std::vector<int> ml_hidden = {500, 200};
  int ml_epochs = 50;
  double ml_learning_rate = 1e-3;
  double ml_beta1 = 0.9;
  double ml_beta2 = 0.999;
  int ml_batch_size = 256;
  double ml_validation_fraction = 0.05;
  double ml_weight_decay = 1.0;  // decoupled (AdamW style)
  bool ml_prune_singular = false;

  [[nodiscard]] int num_antennas() const { return array_nx * array_ny; }
  [[nodiscard]] double wavelength_m() const { return kSpeedOfLight / carrier_hz; }

  /// Throws ConfigError on the first violated constraint.
  void validate() const {
    auto require = [](bool ok, const std::string& what) {
      if (!ok) throw ConfigError("invalid config: " + what);
    };
    require(num_users >= 1, "num_users must be >= 1");
    require(max_selected >= 1, "max_selected must be >= 1");
    require(num_rf_chains >= 1, "num_rf_chains must be >= 1");
    require(max_selected <= num_rf_chains, "max_selected must not exceed num_rf_chains");
    require(tx_power_w > 0.0, "tx_power_w must be > 0");
    require(noise_power_w > 0.0, "noise_power_w must be > 0");
    require(ema_delta >= 0.0 && ema_delta <= 1.0, "ema_delta must lie in [0,1]");
    require(carrier_hz > 0.0, "carrier_hz must be > 0");
    require(array_nx >= 1 && array_ny >= 1, "array dimensions must be >= 1");
    require(element_spacing_wavelengths > 0.0, "element spacing must be > 0");
    require(codebook_n_az >= 1 && codebook_n_el >= 1, "codebook grid must be >= 1x1");
    require(cell_radius_m > 0.0, "cell_radius_m must be > 0");
    require(min_distance_m >= 0.0 && min_distance_m < cell_radius_m,
            "min_distance_m must lie in [0, cell_radius_m)");
    require(user_speed_kmh >= 0.0, "user_speed_kmh must be >= 0");
    require(num_clusters >= 1, "num_clusters must be >= 1");
    require(subpaths_per_cluster >= 1, "subpaths_per_cluster must be >= 1");
    require(angular_spread_deg >= 0.0, "angular_spread_deg must be >= 0");
    require(pathloss_exponent > 0.0, "pathloss_exponent must be > 0");
    require(shadowing_std_db >= 0.0, "shadowing_std_db must be >= 0");
    require(short_block_s >= 0.0, "short_block_s must be >= 0");
    require(slots_per_long_block >= 1, "slots_per_long_block must be >= 1");
    require(slots_per_episode >= 1, "slots_per_episode must be >= 1");
    require(train_episodes >= 1, "train_episodes must be >= 1");
    require(test_episodes >= 1, "test_episodes must be >= 1");
    require(exhaustive_cap >= 1.0, "exhaustive_cap must be >= 1");
    require(jobs >= 1, "jobs must be >= 1");
    require(!ml_hidden.empty(), "ml_hidden needs at least one layer");
    for (int h : ml_hidden) require(h >= 1, "ml_hidden sizes must be >= 1");
    require(ml_epochs >= 0, "ml_epochs must be >= 0");
    require(ml_learning_rate > 0.0, "ml_learning_rate must be > 0");
    require(ml_batch_size >= 1, "ml_batch_size must be >= 1");
    require(ml_weight_decay >= 0.0, "ml_weight_decay must be >= 0");
    require(ml_validation_fraction >= 0.0 && ml_validation_fraction < 1.0,
            "ml_validation_fraction must lie in [0,1)");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::string unquote(const std::string& s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

inline void read_config_file(const std::filesystem::path& path,
                             std::map<std::string, std::string>& out,
                             std::set<std::filesystem::path>& visiting) {
  const auto canonical = std::filesystem::weakly_canonical(path);
  if (visiting.contains(canonical)) {
    throw ConfigError("config 'extends' cycle at " + path.string());
  }
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  visiting.insert(canonical);

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = unquote(trim(line.substr(eq + 1)));
    if (key == "extends") {
      read_config_file(path.parent_path() / value, out, visiting);
    } else {
      out[key] = value;
    }
  }
  visiting.erase(canonical);
}

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  std::istringstream is(text);
  T value{};
  if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError("key '" + key + "': expected true/false, got '" + text + "'");
  } else {
    is >> value;
    if (is.fail() || !(is >> std::ws).eof()) {
      throw ConfigError("key '" + key + "': cannot parse '" + text + "'");
    }
    return value;
  }
}

inline std::vector<int> parse_int_list(const std::string& key, std::string text) {
  for (char& c : text) {
    if (c == '[' || c == ']' || c == ',' || c == 'x') c = ' ';
  }
  std::istringstream is(text);
  std::vector<int> out;
  int v = 0;
  while (is >> v) out.push_back(v);
  if (!is.eof()) throw ConfigError("key '" + key + "': cannot parse integer list");
  return out;
}

}  // namespace detail

/// Applies key/value pairs onto `cfg`. Unknown keys are rejected.
inline void apply_config_values(SystemConfig& cfg, const std::map<std::string, std::string>& kv) {
  using detail::parse_value;
  for (const auto& [key, v] : kv) {
    // clang-format off
    if (key == "num_users") cfg.num_users = parse_value<int>(key, v);
    else if (key == "max_selected") cfg.max_selected = parse_value<int>(key, v);
    else if (key == "num_rf_chains") cfg.num_rf_chains = parse_value<int>(key, v);
    else if (key == "tx_power_w") cfg.tx_power_w = parse_value<double>(key, v);
    else if (key == "noise_power_w") cfg.noise_power_w = parse_value<double>(key, v);
    else if (key == "ema_delta") cfg.ema_delta = parse_value<double>(key, v);
    else if (key == "carrier_hz") cfg.carrier_hz = parse_value<double>(key, v);
    else if (key == "array_nx") cfg.array_nx = parse_value<int>(key, v);
    else if (key == "array_ny") cfg.array_ny = parse_value<int>(key, v);
    else if (key == "element_spacing_wavelengths") cfg.element_spacing_wavelengths = parse_value<double>(key, v);
    else if (key == "downtilt_deg") cfg.downtilt_deg = parse_value<double>(key, v);
    else if (key == "bs_height_m") cfg.bs_height_m = parse_value<double>(key, v);
    else if (key == "codebook_n_az") cfg.codebook_n_az = parse_value<int>(key, v);
    else if (key == "codebook_n_el") cfg.codebook_n_el = parse_value<int>(key, v);
    else if (key == "codebook_az_min_deg") cfg.codebook_az_min_deg = parse_value<double>(key, v);
    else if (key == "codebook_az_max_deg") cfg.codebook_az_max_deg = parse_value<double>(key, v);
    else if (key == "codebook_el_min_deg") cfg.codebook_el_min_deg = parse_value<double>(key, v);
    else if (key == "codebook_el_max_deg") cfg.codebook_el_max_deg = parse_value<double>(key, v);
    else if (key == "codebook_memory_budget_bytes") cfg.codebook_memory_budget_bytes = parse_value<double>(key, v);
    else if (key == "cell_radius_m") cfg.cell_radius_m = parse_value<double>(key, v);
    else if (key == "min_distance_m") cfg.min_distance_m = parse_value<double>(key, v);
    else if (key == "user_height_m") cfg.user_height_m = parse_value<double>(key, v);
    else if (key == "user_speed_kmh") cfg.user_speed_kmh = parse_value<double>(key, v);
    else if (key == "num_clusters") cfg.num_clusters = parse_value<int>(key, v);
    else if (key == "subpaths_per_cluster") cfg.subpaths_per_cluster = parse_value<int>(key, v);
    else if (key == "angular_spread_deg") cfg.angular_spread_deg = parse_value<double>(key, v);
    else if (key == "scatterer_elevation_spread_deg") cfg.scatterer_elevation_spread_deg = parse_value<double>(key, v);
    else if (key == "pathloss_exponent") cfg.pathloss_exponent = parse_value<double>(key, v);
    else if (key == "pathloss_intercept_db") cfg.pathloss_intercept_db = parse_value<double>(key, v);
    else if (key == "shadowing_std_db") cfg.shadowing_std_db = parse_value<double>(key, v);
    else if (key == "short_block_s") cfg.short_block_s = parse_value<double>(key, v);
    else if (key == "evolve_gains") cfg.evolve_gains = parse_value<bool>(key, v);
    else if (key == "slots_per_long_block") cfg.slots_per_long_block = parse_value<int>(key, v);
    else if (key == "slots_per_episode") cfg.slots_per_episode = parse_value<int>(key, v);
    else if (key == "train_episodes") cfg.train_episodes = parse_value<int>(key, v);
    else if (key == "test_episodes") cfg.test_episodes = parse_value<int>(key, v);
    else if (key == "seed") cfg.seed = parse_value<std::uint64_t>(key, v);
    else if (key == "exhaustive_cap") cfg.exhaustive_cap = parse_value<double>(key, v);
    else if (key == "jobs") cfg.jobs = parse_value<int>(key, v);
    else if (key == "output_dir") cfg.output_dir = v;
    else if (key == "ml_inputs") cfg.ml_inputs = v;
    else if (key == "ml_hidden") cfg.ml_hidden = detail::parse_int_list(key, v);
    else if (key == "ml_epochs") cfg.ml_epochs = parse_value<int>(key, v);
    else if (key == "ml_learning_rate") cfg.ml_learning_rate = parse_value<double>(key, v);
    else if (key == "ml_beta1") cfg.ml_beta1 = parse_value<double>(key, v);
    else if (key == "ml_beta2") cfg.ml_beta2 = parse_value<double>(key, v);
    else if (key == "ml_batch_size") cfg.ml_batch_size = parse_value<int>(key, v);
    else if (key == "ml_validation_fraction") cfg.ml_validation_fraction = parse_value<double>(key, v);
    else if (key == "ml_weight_decay") cfg.ml_weight_decay = parse_value<double>(key, v);
    else if (key == "ml_prune_singular") cfg.ml_prune_singular = parse_value<bool>(key, v);
    else throw ConfigError("unknown config key '" + key + "'");
    // clang-format on
  }
}

/// Loads a config file (following `extends`) on top of the built-in defaults.
inline SystemConfig load_config(const std::filesystem::path& path) {
  std::map<std::string, std::string> kv;
  std::set<std::filesystem::path> visiting;
  detail::read_config_file(path, kv, visiting);
  SystemConfig cfg;
  apply_config_values(cfg, kv);
  cfg.validate();
  return cfg;
}

/// Canonical text form; used for manifests and the config hash.
inline std::string dump_config(const SystemConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "num_users = " << c.num_users << '\n'
     << "max_selected = " << c.max_selected << '\n'
     << "num_rf_chains = " << c.num_rf_chains << '\n'
     << "tx_power_w = " << c.tx_power_w << '\n'
     << "noise_power_w = " << c.noise_power_w << '\n'
     << "ema_delta = " << c.ema_delta << '\n'
     << "carrier_hz = " << c.carrier_hz << '\n'
     << "array_nx = " << c.array_nx << '\n'
     << "array_ny = " << c.array_ny << '\n'
     << "element_spacing_wavelengths = " << c.element_spacing_wavelengths << '\n'
     << "downtilt_deg = " << c.downtilt_deg << '\n'
     << "bs_height_m = " << c.bs_height_m << '\n'
     << "codebook_n_az = " << c.codebook_n_az << '\n'
     << "codebook_n_el = " << c.codebook_n_el << '\n'
     << "codebook_az_min_deg = " << c.codebook_az_min_deg << '\n'
     << "codebook_az_max_deg = " << c.codebook_az_max_deg << '\n'
     << "codebook_el_min_deg = " << c.codebook_el_min_deg << '\n'
     << "codebook_el_max_deg = " << c.codebook_el_max_deg << '\n'
     << "codebook_memory_budget_bytes = " << c.codebook_memory_budget_bytes << '\n'
     << "cell_radius_m = " << c.cell_radius_m << '\n'
     << "min_distance_m = " << c.min_distance_m << '\n'
     << "user_height_m = " << c.user_height_m << '\n'
     << "user_speed_kmh = " << c.user_speed_kmh << '\n'
     << "num_clusters = " << c.num_clusters << '\n'
     << "subpaths_per_cluster = " << c.subpaths_per_cluster << '\n'
     << "angular_spread_deg = " << c.angular_spread_deg << '\n'
     << "scatterer_elevation_spread_deg = " << c.scatterer_elevation_spread_deg << '\n'
     << "pathloss_exponent = " << c.pathloss_exponent << '\n'
     << "pathloss_intercept_db = " << c.pathloss_intercept_db << '\n'
     << "shadowing_std_db = " << c.shadowing_std_db << '\n'
     << "short_block_s = " << c.short_block_s << '\n'
     << "evolve_gains = " << (c.evolve_gains ? "true" : "false") << '\n'
     << "slots_per_long_block = " << c.slots_per_long_block << '\n'
     << "slots_per_episode = " << c.slots_per_episode << '\n'
     << "train_episodes = " << c.train_episodes << '\n'
     << "test_episodes = " << c.test_episodes << '\n'
     << "seed = " << c.seed << '\n'
     << "exhaustive_cap = " << c.exhaustive_cap << '\n'
     << "ml_inputs = " << c.ml_inputs << '\n'
     << "ml_hidden = [";
  for (std::size_t i = 0; i < c.ml_hidden.size(); ++i) os << (i ? ", " : "") << c.ml_hidden[i];
  os << "]\n"
     << "ml_epochs = " << c.ml_epochs << '\n'
     << "ml_learning_rate = " << c.ml_learning_rate << '\n'
     << "ml_beta1 = " << c.ml_beta1 << '\n'
     << "ml_beta2 = " << c.ml_beta2 << '\n'
     << "ml_batch_size = " << c.ml_batch_size << '\n'
     << "ml_validation_fraction = " << c.ml_validation_fraction << '\n'
     << "ml_weight_decay = " << c.ml_weight_decay << '\n'
     << "ml_prune_singular = " << (c.ml_prune_singular ? "true" : "false") << '\n';
  return os.str();
}

/// 64-bit FNV-1a; stable across platforms, used only for run manifests.
inline std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace mmw

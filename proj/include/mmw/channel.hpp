#pragma once

// Clustered mmWave downlink channel with two timescales.
//
// Each user sees K clusters of L sub-paths. Cluster directions are derived
// from the user's position (cluster 0 points along the direct BS-user
// direction, the others keep fixed scatterer offsets for the whole episode)
// and are only refreshed at long-block boundaries. Complex sub-path gains
// follow a first-order Gauss-Markov process per short block with the Jakes
// correlation J0(2 pi f_D dt).

#include <algorithm>
#include <cmath>
#include <vector>

#include "mmw/common.hpp"
#include "mmw/config.hpp"

namespace mmw {

struct ArrayGeometry {
  int n_x = 8;
  int n_y = 2;
  double spacing_wavelengths = 0.5;
  double downtilt_deg = 10.0;
  double carrier_hz = 28e9;

  [[nodiscard]] int size() const { return n_x * n_y; }

  void validate() const {
    if (n_x < 1 || n_y < 1) throw ConfigError("array dimensions must be >= 1");
    if (!(spacing_wavelengths > 0.0)) throw ConfigError("element spacing must be > 0");
    if (!(carrier_hz > 0.0)) throw ConfigError("carrier frequency must be > 0");
  }

  static ArrayGeometry from_config(const SystemConfig& cfg) {
    return {cfg.array_nx, cfg.array_ny, cfg.element_spacing_wavelengths, cfg.downtilt_deg,
            cfg.carrier_hz};
  }
};

/// Unit-norm UPA steering vector.
///
/// Angles are measured in the array frame: azimuth in the horizontal plane of
/// the (tilted) boresight, elevation above it. Element (m, n) sits at column m
/// (horizontal, n_x of them) and row n (vertical); its index is n * n_x + m.
inline CVector array_response(const ArrayGeometry& geometry, double azimuth, double elevation) {
  const int n = geometry.size();
  const double k = 2.0 * kPi * geometry.spacing_wavelengths;
  const double u = std::sin(azimuth) * std::cos(elevation);
  const double v = std::sin(elevation);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  CVector a(n);
  for (int row = 0; row < geometry.n_y; ++row) {
    for (int col = 0; col < geometry.n_x; ++col) {
      a(row * geometry.n_x + col) = std::polar(scale, k * (col * u + row * v));
    }
  }
  return a;
}

/// Azimuth/elevation pair in radians.
struct Direction {
  double azimuth = 0.0;
  double elevation = 0.0;
  bool operator==(const Direction&) const = default;
};

/// Converts a direction in the site frame (azimuth from the array's facing
/// direction, elevation above horizon) into the downtilted array frame.
inline Direction to_array_frame(const ArrayGeometry& geometry, Direction global) {
  const double tilt = deg_to_rad(geometry.downtilt_deg);
  const double x = std::cos(global.elevation) * std::cos(global.azimuth);
  const double y = std::cos(global.elevation) * std::sin(global.azimuth);
  const double z = std::sin(global.elevation);
  // Boresight is (cos t, 0, -sin t); the array's "up" axis is (sin t, 0, cos t).
  const double xb = x * std::cos(tilt) - z * std::sin(tilt);
  const double zb = x * std::sin(tilt) + z * std::cos(tilt);
  return {std::atan2(y, xb), std::asin(std::clamp(zb, -1.0, 1.0))};
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct Cluster {
  /// Current cluster centre, site frame.
  Direction direction;
  /// Offset of the centre from the direct BS-user direction (fixed per episode).
  Direction scatterer_offset;
  double power = 1.0;
  /// Per sub-path angular offsets from the cluster centre (fixed per episode).
  std::vector<Direction> subpath_offsets;

  bool operator==(const Cluster&) const = default;
};

struct ClusterSet {
  std::vector<Cluster> clusters;

  [[nodiscard]] double total_power() const {
    double p = 0.0;
    for (const auto& c : clusters) p += c.power;
    return p;
  }
  bool operator==(const ClusterSet&) const = default;
};

struct UserChannel {
  Vec2 position;
  Vec2 velocity;
  ClusterSet clusters;
  /// Sub-path gains, cluster-major (cluster k, sub-path l at k * L + l).
  std::vector<cplx> path_gains;
  /// Array-frame steering vectors of all sub-paths, one column each.
  CMatrix steering;
  /// Log-normal shadowing, fixed for the episode.
  double shadowing_db = 0.0;
  /// Large-scale amplitude sqrt(N_BS * pathloss_gain * shadowing).
  double amplitude = 0.0;
  CVector h;
};

struct ChannelModelParams {
  ArrayGeometry geometry;
  double cell_radius_m = 100.0;
  double min_distance_m = 10.0;
  double bs_height_m = 7.0;
  double user_height_m = 1.5;
  double speed_mps = kmh_to_mps(4.0);
  int num_clusters = 3;
  int subpaths = 5;
  double angular_spread_rad = deg_to_rad(5.0);
  double scatterer_elevation_spread_rad = deg_to_rad(10.0);
  double pathloss_exponent = 2.9;
  double pathloss_intercept_db = 72.0;
  double shadowing_std_db = 8.7;
  bool evolve_gains = true;

  static ChannelModelParams from_config(const SystemConfig& cfg) {
    ChannelModelParams p;
    p.geometry = ArrayGeometry::from_config(cfg);
    p.cell_radius_m = cfg.cell_radius_m;
    p.min_distance_m = cfg.min_distance_m;
    p.bs_height_m = cfg.bs_height_m;
    p.user_height_m = cfg.user_height_m;
    p.speed_mps = kmh_to_mps(cfg.user_speed_kmh);
    p.num_clusters = cfg.num_clusters;
    p.subpaths = cfg.subpaths_per_cluster;
    p.angular_spread_rad = deg_to_rad(cfg.angular_spread_deg);
    p.scatterer_elevation_spread_rad = deg_to_rad(cfg.scatterer_elevation_spread_deg);
    p.pathloss_exponent = cfg.pathloss_exponent;
    p.pathloss_intercept_db = cfg.pathloss_intercept_db;
    p.shadowing_std_db = cfg.shadowing_std_db;
    p.evolve_gains = cfg.evolve_gains;
    return p;
  }
};

/// All users' channels plus the episode's random stream.
struct ChannelState {
  ChannelModelParams params;
  std::vector<UserChannel> users;
  Rng rng;

  [[nodiscard]] int num_users() const { return static_cast<int>(users.size()); }
  [[nodiscard]] int num_antennas() const { return params.geometry.size(); }

  /// N_BS x I matrix whose column i is h_i.
  [[nodiscard]] CMatrix channel_matrix() const {
    CMatrix hm(num_antennas(), num_users());
    for (int i = 0; i < num_users(); ++i) hm.col(i) = users[i].h;
    return hm;
  }
};

/// Free-space loss at 1 m in dB.
inline double fspl_1m_db(double carrier_hz) {
  return 20.0 * std::log10(4.0 * kPi * carrier_hz / kSpeedOfLight);
}

/// Log-distance path loss as a linear power gain; distances below 1 m are
/// clamped to 1 m.
inline double pathloss_gain(double distance_m, double intercept_db, double exponent) {
  const double pl_db = intercept_db + 10.0 * exponent * std::log10(std::max(distance_m, 1.0));
  return std::pow(10.0, -pl_db / 10.0);
}

/// Gauss-Markov coefficient for one short block of `dt` seconds.
inline double gain_correlation(double speed_mps, double carrier_hz, double dt) {
  const double doppler = speed_mps * carrier_hz / kSpeedOfLight;
  return std::cyl_bessel_j(0.0, 2.0 * kPi * doppler * dt);
}

namespace detail {

inline double laplacian(Rng& rng, double stddev) {
  if (stddev <= 0.0) return 0.0;
  std::exponential_distribution<double> e(std::sqrt(2.0) / stddev);
  std::bernoulli_distribution sign(0.5);
  const double mag = e(rng);
  return sign(rng) ? mag : -mag;
}

inline Direction direct_direction(const ChannelModelParams& p, Vec2 pos) {
  const double ground = std::hypot(pos.x, pos.y);
  return {std::atan2(pos.y, pos.x), std::atan2(p.user_height_m - p.bs_height_m, ground)};
}

inline double distance_3d(const ChannelModelParams& p, Vec2 pos) {
  return std::hypot(std::hypot(pos.x, pos.y), p.bs_height_m - p.user_height_m);
}

/// Recomputes cluster centres from the current position and the array-frame
/// steering matrix. Does not touch gains.
inline void refresh_geometry(const ChannelModelParams& p, UserChannel& user) {
  const Direction direct = direct_direction(p, user.position);
  const int paths = p.num_clusters * p.subpaths;
  user.steering.resize(p.geometry.size(), paths);
  for (int k = 0; k < p.num_clusters; ++k) {
    Cluster& c = user.clusters.clusters[k];
    c.direction = {direct.azimuth + c.scatterer_offset.azimuth,
                   std::clamp(direct.elevation + c.scatterer_offset.elevation, -kPi / 2, kPi / 2)};
    for (int l = 0; l < p.subpaths; ++l) {
      const Direction& off = c.subpath_offsets[l];
      const Direction site{c.direction.azimuth + off.azimuth,
                           std::clamp(c.direction.elevation + off.elevation, -kPi / 2, kPi / 2)};
      const Direction local = to_array_frame(p.geometry, site);
      user.steering.col(k * p.subpaths + l) =
          array_response(p.geometry, local.azimuth, local.elevation);
    }
  }
  const double gain = pathloss_gain(distance_3d(p, user.position), p.pathloss_intercept_db,
                                    p.pathloss_exponent) *
                      std::pow(10.0, user.shadowing_db / 10.0);
  user.amplitude = std::sqrt(p.geometry.size() * gain);
}

inline void draw_gains(const ChannelModelParams& p, UserChannel& user, Rng& rng) {
  user.path_gains.resize(static_cast<std::size_t>(p.num_clusters * p.subpaths));
  for (int k = 0; k < p.num_clusters; ++k) {
    const double var = user.clusters.clusters[k].power / p.subpaths;
    for (int l = 0; l < p.subpaths; ++l) user.path_gains[k * p.subpaths + l] = complex_gaussian(rng, var);
  }
}

inline void recompute_h(UserChannel& user) {
  const Eigen::Map<const CVector> gains(user.path_gains.data(),
                                        static_cast<Eigen::Index>(user.path_gains.size()));
  user.h = user.amplitude * (user.steering * gains);
}

}  // namespace detail

/// Draws a fresh episode: users uniform over the annulus
/// [min_distance, radius], random heading at the configured speed.
inline ChannelState generate_episode(std::uint64_t seed, const SystemConfig& cfg) {
  if (cfg.num_users < 1) throw ConfigError("generate_episode: need at least one user");
  if (!(cfg.cell_radius_m > 0.0)) throw ConfigError("generate_episode: cell radius must be > 0");
  if (cfg.min_distance_m < 0.0 || cfg.min_distance_m >= cfg.cell_radius_m) {
    throw ConfigError("generate_episode: min_distance_m must lie in [0, cell_radius_m)");
  }
  if (cfg.num_clusters < 1 || cfg.subpaths_per_cluster < 1) {
    throw ConfigError("generate_episode: need >= 1 cluster and >= 1 sub-path");
  }
  ChannelState state;
  state.params = ChannelModelParams::from_config(cfg);
  state.params.geometry.validate();
  state.rng.seed(seed);
  const auto& p = state.params;
  Rng& rng = state.rng;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  std::uniform_real_distribution<double> el_spread(-p.scatterer_elevation_spread_rad,
                                                   p.scatterer_elevation_spread_rad);
  std::exponential_distribution<double> expo(1.0);
  std::normal_distribution<double> shadowing(0.0, p.shadowing_std_db);

  const double r2_min = p.min_distance_m * p.min_distance_m;
  const double r2_max = p.cell_radius_m * p.cell_radius_m;

  state.users.resize(static_cast<std::size_t>(cfg.num_users));
  for (auto& user : state.users) {
    const double r = std::sqrt(r2_min + unit(rng) * (r2_max - r2_min));
    const double phi = angle(rng);
    user.position = {r * std::cos(phi), r * std::sin(phi)};
    const double heading = angle(rng);
    user.velocity = {p.speed_mps * std::cos(heading), p.speed_mps * std::sin(heading)};
    user.shadowing_db = p.shadowing_std_db > 0.0 ? shadowing(rng) : 0.0;

    auto& clusters = user.clusters.clusters;
    clusters.resize(static_cast<std::size_t>(p.num_clusters));
    double total = 0.0;
    for (int k = 0; k < p.num_clusters; ++k) {
      Cluster& c = clusters[k];
      if (k == 0) {
        c.scatterer_offset = {0.0, 0.0};
        c.power = 1.0 + expo(rng);  // direct cluster dominates on average
      } else {
        c.scatterer_offset = {angle(rng), el_spread(rng)};
        c.power = expo(rng);
      }
      total += c.power;
      c.subpath_offsets.resize(static_cast<std::size_t>(p.subpaths));
      for (auto& off : c.subpath_offsets) {
        off = {detail::laplacian(rng, p.angular_spread_rad),
               detail::laplacian(rng, p.angular_spread_rad)};
      }
    }
    for (auto& c : clusters) c.power /= total;

    detail::refresh_geometry(p, user);
    detail::draw_gains(p, user, rng);
    detail::recompute_h(user);
  }
  return state;
}

/// One short block: gains evolve, users move, angles stay put.
inline ChannelState advance_short_block(ChannelState state, double dt) {
  const auto& p = state.params;
  for (auto& user : state.users) {
    user.position.x += user.velocity.x * dt;
    user.position.y += user.velocity.y * dt;
    if (p.evolve_gains) {
      const double rho = gain_correlation(p.speed_mps, p.geometry.carrier_hz, dt);
      const double innovation = std::sqrt(std::max(0.0, 1.0 - rho * rho));
      for (int k = 0; k < p.num_clusters; ++k) {
        const double var = user.clusters.clusters[k].power / p.subpaths;
        for (int l = 0; l < p.subpaths; ++l) {
          cplx& g = user.path_gains[k * p.subpaths + l];
          g = rho * g + innovation * complex_gaussian(state.rng, var);
        }
      }
    }
    detail::recompute_h(user);
  }
  return state;
}

/// Long-block boundary: cluster directions follow the users' new positions
/// and the sub-path gains are redrawn.
inline ChannelState advance_long_block(ChannelState state) {
  for (auto& user : state.users) {
    detail::refresh_geometry(state.params, user);
    detail::draw_gains(state.params, user, state.rng);
    detail::recompute_h(user);
  }
  return state;
}

}  // namespace mmw

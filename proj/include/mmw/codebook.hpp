#pragma once

// Grid-of-beams analog codebook and per-user beam selection.

#include <ostream>
#include <vector>

#include "mmw/channel.hpp"
#include "mmw/common.hpp"

namespace mmw {

struct BeamAngle {
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
};

/// Steering vectors on a uniform angular grid, stored as the columns of
/// `beams`. Beam k = el_index * n_az + az_index (0-based).
struct Codebook {
  CMatrix beams;
  int n_az = 0;
  int n_el = 0;
  double az_min_deg = 0.0;
  double az_max_deg = 0.0;
  double el_min_deg = 0.0;
  double el_max_deg = 0.0;
  std::vector<BeamAngle> angles;

  [[nodiscard]] int size() const { return static_cast<int>(beams.cols()); }
  [[nodiscard]] auto beam(int k) const { return beams.col(k); }
};

/// Grid points are the centres of n equal bins over each range, so a 1x1
/// grid over a symmetric range is the broadside beam.
inline Codebook build_grid_codebook(const ArrayGeometry& geometry, int n_az, int n_el,
                                    double az_min_deg, double az_max_deg, double el_min_deg,
                                    double el_max_deg,
                                    double memory_budget_bytes = 1024.0 * 1024.0 * 1024.0) {
  if (n_az < 1 || n_el < 1) throw ConfigError("codebook grid must be at least 1x1");
  geometry.validate();
  const double bytes = static_cast<double>(n_az) * n_el * geometry.size() * sizeof(cplx);
  if (bytes > memory_budget_bytes) {
    throw ConfigError("codebook of " + std::to_string(n_az) + "x" + std::to_string(n_el) +
                      " beams exceeds the memory budget");
  }
  Codebook cb;
  cb.n_az = n_az;
  cb.n_el = n_el;
  cb.az_min_deg = az_min_deg;
  cb.az_max_deg = az_max_deg;
  cb.el_min_deg = el_min_deg;
  cb.el_max_deg = el_max_deg;
  cb.beams.resize(geometry.size(), static_cast<Eigen::Index>(n_az) * n_el);
  cb.angles.reserve(static_cast<std::size_t>(n_az * n_el));
  const double az_step = (az_max_deg - az_min_deg) / n_az;
  const double el_step = (el_max_deg - el_min_deg) / n_el;
  for (int e = 0; e < n_el; ++e) {
    const double el = el_min_deg + (e + 0.5) * el_step;
    for (int a = 0; a < n_az; ++a) {
      const double az = az_min_deg + (a + 0.5) * az_step;
      cb.beams.col(e * n_az + a) = array_response(geometry, deg_to_rad(az), deg_to_rad(el));
      cb.angles.push_back({az, el});
    }
  }
  return cb;
}

inline Codebook build_grid_codebook(const SystemConfig& cfg) {
  return build_grid_codebook(ArrayGeometry::from_config(cfg), cfg.codebook_n_az, cfg.codebook_n_el,
                             cfg.codebook_az_min_deg, cfg.codebook_az_max_deg,
                             cfg.codebook_el_min_deg, cfg.codebook_el_max_deg,
                             cfg.codebook_memory_budget_bytes);
}

/// argmax_k |h^H g_k|^2, lowest index on ties.
inline int select_best_beam(const CVector& h, const Codebook& codebook) {
  if (codebook.size() == 0) throw std::invalid_argument("select_best_beam: empty codebook");
  if (h.size() != codebook.beams.rows()) {
    throw std::invalid_argument("select_best_beam: channel length does not match the codebook");
  }
  const RVector gains = (codebook.beams.adjoint() * h).cwiseAbs2();
  // Mirrored beams tie up to rounding; keep the lower index.
  int best = 0;
  for (int k = 1; k < gains.size(); ++k) {
    if (gains(k) > gains(best) * (1.0 + 1e-12)) best = k;
  }
  return best;
}

/// Per-user beam indices and the resolved analog beams (column i = f*_RF,i).
struct BeamAssignment {
  std::vector<int> beam_index;
  CMatrix analog;

  [[nodiscard]] int num_users() const { return static_cast<int>(beam_index.size()); }
};

inline BeamAssignment sweep_assignments(const ChannelState& state, const Codebook& codebook) {
  BeamAssignment out;
  out.beam_index.reserve(state.users.size());
  out.analog.resize(codebook.beams.rows(), state.num_users());
  for (int i = 0; i < state.num_users(); ++i) {
    const int k = select_best_beam(state.users[i].h, codebook);
    out.beam_index.push_back(k);
    out.analog.col(i) = codebook.beam(k);
  }
  return out;
}

/// CSV export of the beam grid: index,azimuth_deg,elevation_deg.
inline void write_codebook_csv(std::ostream& os, const Codebook& codebook) {
  os << "index,azimuth_deg,elevation_deg\n";
  for (int k = 0; k < codebook.size(); ++k) {
    os << k << ',' << codebook.angles[k].azimuth_deg << ',' << codebook.angles[k].elevation_deg
       << '\n';
  }
}

}  // namespace mmw

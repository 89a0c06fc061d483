#pragma once

// Zero-forcing digital precoding over a selected user set and the weighted
// sum-rate objective Q(M).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "mmw/channel.hpp"
#include "mmw/codebook.hpp"
#include "mmw/common.hpp"

namespace mmw {

/// u(i, j) = h_i^H f*_RF,j for all user pairs, plus the link budget.
struct EffectiveChannels {
  CMatrix u;
  std::vector<double> noise;
  double power = 0.0;

  [[nodiscard]] int num_users() const { return static_cast<int>(u.rows()); }
};

inline EffectiveChannels measure_effective_channels(const CMatrix& channels,
                                                    const BeamAssignment& beams,
                                                    double noise_power, double tx_power) {
  EffectiveChannels eff;
  eff.u = channels.adjoint() * beams.analog;
  eff.noise.assign(static_cast<std::size_t>(channels.cols()), noise_power);
  eff.power = tx_power;
  return eff;
}

inline EffectiveChannels measure_effective_channels(const ChannelState& state,
                                                    const BeamAssignment& beams,
                                                    double noise_power, double tx_power) {
  return measure_effective_channels(state.channel_matrix(), beams, noise_power, tx_power);
}

/// Outcome of one scheduling decision.
struct SelectionResult {
  std::vector<int> selected;  // ascending user indices
  CMatrix g;                  // |M| x |M| effective channel submatrix
  CMatrix f_bb_star;          // normalized digital precoder, column a serves selected[a]
  std::vector<double> rates;  // bits/s/Hz, length I, zero for unselected users
  std::vector<double> sinr;   // length I
  double q = 0.0;             // sum_i w_i r_i
  bool feasible = true;       // false: the chosen set was singular, nothing transmitted

  /// Users that actually receive data this slot.
  [[nodiscard]] int served() const { return feasible ? static_cast<int>(selected.size()) : 0; }
};

inline SelectionResult empty_selection(int num_users) {
  SelectionResult r;
  r.rates.assign(static_cast<std::size_t>(num_users), 0.0);
  r.sinr.assign(static_cast<std::size_t>(num_users), 0.0);
  return r;
}

namespace detail {

inline void check_user_set(std::span<const int> users, int num_users) {
  if (users.empty()) throw std::invalid_argument("user set must not be empty");
  for (std::size_t a = 0; a < users.size(); ++a) {
    if (users[a] < 0 || users[a] >= num_users) throw std::out_of_range("user index out of range");
    for (std::size_t b = 0; b < a; ++b) {
      if (users[a] == users[b]) throw std::invalid_argument("duplicate user index in set");
    }
  }
}

inline CMatrix gather(const CMatrix& m, std::span<const int> rows, std::span<const int> cols) {
  CMatrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t b = 0; b < cols.size(); ++b) out(a, b) = m(rows[a], cols[b]);
  }
  return out;
}

}  // namespace detail

/// G(M): rows and columns of u restricted to `users`, in the given order.
/// Callers pass ascending indices.
inline CMatrix effective_submatrix(const CMatrix& u, std::span<const int> users) {
  detail::check_user_set(users, static_cast<int>(u.rows()));
  return detail::gather(u, users, users);
}

inline constexpr double kMaxConditionNumber = 1e12;

struct ZfPrecoder {
  CMatrix unnormalized;  // G^{-1}, so G * unnormalized == I
  CMatrix normalized;    // F*_BB, each composite column carries P/M
  std::vector<double> composite_norms;  // ||F_RF(M) f_BB,i|| before scaling
  double condition = 1.0;               // 1-norm condition number of G
};

/// ZF precoder given G and the Gram matrix F_RF(M)^H F_RF(M) of the selected
/// analog beams. Returns nullopt when G is singular or worse conditioned than
/// `max_condition`.
inline std::optional<ZfPrecoder> try_zf_precoder_gram(const CMatrix& g, const CMatrix& analog_gram,
                                                      double power,
                                                      double max_condition = kMaxConditionNumber) {
  const auto m = g.rows();
  if (m == 0 || g.cols() != m) throw std::invalid_argument("zf_precoder: G must be square and non-empty");
  if (analog_gram.rows() != m || analog_gram.cols() != m) {
    throw std::invalid_argument("zf_precoder: analog Gram size mismatch");
  }
  // For square full-rank G, G^H (G G^H)^{-1} == G^{-1}. Inverting G directly
  // avoids squaring the condition number.
  ZfPrecoder out;
  const double g_norm1 = g.cwiseAbs().colwise().sum().maxCoeff();
  if (!(g_norm1 > 0.0) || !std::isfinite(g_norm1)) return std::nullopt;
  Eigen::PartialPivLU<CMatrix> lu(g);
  out.unnormalized = lu.inverse();
  if (!out.unnormalized.allFinite()) return std::nullopt;
  const double inv_norm1 = out.unnormalized.cwiseAbs().colwise().sum().maxCoeff();
  out.condition = g_norm1 * inv_norm1;
  if (!(out.condition <= max_condition)) return std::nullopt;

  out.normalized.resize(m, m);
  out.composite_norms.resize(static_cast<std::size_t>(m));
  const double per_stream = std::sqrt(power / static_cast<double>(m));
  for (Eigen::Index a = 0; a < m; ++a) {
    const auto col = out.unnormalized.col(a);
    const double norm2 = std::real(col.dot(analog_gram * col));
    if (!(norm2 > 0.0)) return std::nullopt;
    const double norm = std::sqrt(norm2);
    out.composite_norms[a] = norm;
    out.normalized.col(a) = col * (per_stream / norm);
  }
  return out;
}

/// ZF precoder with explicit analog beams (N_BS x M). Throws
/// SingularChannelError on an ill-conditioned G.
inline ZfPrecoder zf_precoder(const CMatrix& g, const CMatrix& analog, double power) {
  if (analog.cols() != g.rows()) throw std::invalid_argument("zf_precoder: analog column count mismatch");
  auto zf = try_zf_precoder_gram(g, analog.adjoint() * analog, power);
  if (!zf) throw SingularChannelError("zf_precoder: effective channel matrix is singular");
  return std::move(*zf);
}

/// SINR, per-user rates (log2, unit bandwidth) and Q for a given precoder.
inline SelectionResult evaluate_rates(const EffectiveChannels& eff, std::span<const int> users,
                                      const CMatrix& f_bb_star, std::span<const double> weights) {
  const int n = eff.num_users();
  if (static_cast<int>(weights.size()) != n) throw std::invalid_argument("evaluate_rates: weight count mismatch");
  SelectionResult r = empty_selection(n);
  if (users.empty()) return r;
  detail::check_user_set(users, n);
  const auto m = static_cast<Eigen::Index>(users.size());
  if (f_bb_star.rows() != m || f_bb_star.cols() != m) {
    throw std::invalid_argument("evaluate_rates: precoder size mismatch");
  }
  r.selected.assign(users.begin(), users.end());
  r.g = detail::gather(eff.u, users, users);
  r.f_bb_star = f_bb_star;
  // Row a of G is u_i^H(M) for i = users[a].
  const CMatrix received = r.g * f_bb_star;
  for (Eigen::Index a = 0; a < m; ++a) {
    const int i = users[a];
    const double signal = std::norm(received(a, a));
    double interference = 0.0;
    for (Eigen::Index b = 0; b < m; ++b) {
      if (b != a) interference += std::norm(received(a, b));
    }
    r.sinr[i] = signal / (interference + eff.noise[i]);
    r.rates[i] = std::log2(1.0 + r.sinr[i]);
    r.q += weights[i] * r.rates[i];
  }
  return r;
}

/// Per-slot precomputation shared by every candidate set: the Gram matrix of
/// all users' analog beams.
inline CMatrix analog_gram(const BeamAssignment& beams) {
  return beams.analog.adjoint() * beams.analog;
}

/// Q(M) under ZF, or nullopt if M is infeasible. Lean path used inside the
/// combinatorial searches.
inline std::optional<double> zf_objective(const EffectiveChannels& eff, const CMatrix& gram,
                                          std::span<const int> users,
                                          std::span<const double> weights) {
  const CMatrix g = detail::gather(eff.u, users, users);
  const auto zf = try_zf_precoder_gram(g, detail::gather(gram, users, users), eff.power);
  if (!zf) return std::nullopt;
  const CMatrix received = g * zf->normalized;
  double q = 0.0;
  const auto m = static_cast<Eigen::Index>(users.size());
  for (Eigen::Index a = 0; a < m; ++a) {
    double interference = 0.0;
    for (Eigen::Index b = 0; b < m; ++b) {
      if (b != a) interference += std::norm(received(a, b));
    }
    const int i = users[a];
    q += weights[i] * std::log2(1.0 + std::norm(received(a, a)) / (interference + eff.noise[i]));
  }
  return q;
}

/// Full ZF evaluation of a set. Infeasible sets come back with
/// feasible == false, zero rates and Q == 0.
inline SelectionResult zf_evaluate(const EffectiveChannels& eff, const CMatrix& gram,
                                   std::span<const int> users, std::span<const double> weights) {
  if (users.empty()) return empty_selection(eff.num_users());
  detail::check_user_set(users, eff.num_users());
  const CMatrix g = detail::gather(eff.u, users, users);
  const auto zf = try_zf_precoder_gram(g, detail::gather(gram, users, users), eff.power);
  if (!zf) {
    SelectionResult r = empty_selection(eff.num_users());
    r.selected.assign(users.begin(), users.end());
    r.g = g;
    r.feasible = false;
    return r;
  }
  return evaluate_rates(eff, users, zf->normalized, weights);
}

}  // namespace mmw

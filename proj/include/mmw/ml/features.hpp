#pragma once

// Network input layout and per-block normalization.
//
// Layout is always [weights | channels | beams], each block optional:
//   W      scheduling weights w_i                      (I)
//   C(D)   diagonal magnitudes |u_ii|                  (I)
//   C(W)   whole magnitude matrix |u_ij|, row-major    (I^2)
//   C(R/I) real parts then imaginary parts of u_ij    (2 I^2)
//   B      analog beam indices k_i                     (I)
//
// Users enter the network in the order given by user_order().

#include <array>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "mmw/common.hpp"
#include "mmw/schedulers.hpp"

namespace mmw::ml {

enum class ChannelInput { kNone, kDiagonal, kWhole, kRealImag };

struct FeatureLayout {
  bool weights = true;
  ChannelInput channels = ChannelInput::kWhole;
  bool beams = false;

  bool operator==(const FeatureLayout&) const = default;

  static FeatureLayout parse(const std::string& text) {
    FeatureLayout f{false, ChannelInput::kNone, false};
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, '+')) {
      ChannelInput c = ChannelInput::kNone;
      if (tok == "W") {
        f.weights = true;
      } else if (tok == "B") {
        f.beams = true;
      } else if (tok == "C(D)") {
        c = ChannelInput::kDiagonal;
      } else if (tok == "C(W)") {
        c = ChannelInput::kWhole;
      } else if (tok == "C(R/I)") {
        c = ChannelInput::kRealImag;
      } else {
        throw ConfigError("unknown input block '" + tok + "' in '" + text + "'");
      }
      if (c != ChannelInput::kNone) {
        if (f.channels != ChannelInput::kNone) throw ConfigError("at most one channel block allowed in '" + text + "'");
        f.channels = c;
      }
    }
    if (!f.weights && f.channels == ChannelInput::kNone && !f.beams) {
      throw ConfigError("empty input layout '" + text + "'");
    }
    return f;
  }

  [[nodiscard]] std::string to_string() const {
    std::string s;
    auto add = [&](const char* part) {
      if (!s.empty()) s += '+';
      s += part;
    };
    if (weights) add("W");
    switch (channels) {
      case ChannelInput::kDiagonal: add("C(D)"); break;
      case ChannelInput::kWhole: add("C(W)"); break;
      case ChannelInput::kRealImag: add("C(R/I)"); break;
      case ChannelInput::kNone: break;
    }
    if (beams) add("B");
    return s;
  }

  [[nodiscard]] int channel_dim(int num_users) const {
    switch (channels) {
      case ChannelInput::kDiagonal: return num_users;
      case ChannelInput::kWhole: return num_users * num_users;
      case ChannelInput::kRealImag: return 2 * num_users * num_users;
      case ChannelInput::kNone: return 0;
    }
    return 0;
  }

  /// Block sizes in layout order: weights, channels, beams.
  [[nodiscard]] std::array<int, 3> block_dims(int num_users) const {
    return {weights ? num_users : 0, channel_dim(num_users), beams ? num_users : 0};
  }

  [[nodiscard]] int dim(int num_users) const {
    const auto b = block_dims(num_users);
    return b[0] + b[1] + b[2];
  }
};

/// Order in which users are presented to the network: slot r holds user
/// order[r]. With W in the input users are sorted by descending weight
/// (stable, so ties keep index order); otherwise the order is the identity,
/// so that weight-free layouts see no weight information.
inline std::vector<int> user_order(const FeatureLayout& layout, std::span<const double> weights) {
  std::vector<int> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  if (layout.weights) {
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return weights[a] > weights[b]; });
  }
  return order;
}

/// Raw (unnormalized) features of one slot written into `out` (length dim),
/// users taken in `order`.
template <typename Scalar>
void write_features(const FeatureLayout& layout, std::span<const double> weights, const CMatrix& u,
                    std::span<const int> beams, std::span<const int> order, Scalar* out) {
  const auto n = order.size();
  Scalar* p = out;
  if (layout.weights) {
    for (std::size_t r = 0; r < n; ++r) *p++ = static_cast<Scalar>(weights[order[r]]);
  }
  switch (layout.channels) {
    case ChannelInput::kDiagonal:
      for (std::size_t r = 0; r < n; ++r) *p++ = static_cast<Scalar>(std::abs(u(order[r], order[r])));
      break;
    case ChannelInput::kWhole:
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) *p++ = static_cast<Scalar>(std::abs(u(order[r], order[c])));
      }
      break;
    case ChannelInput::kRealImag:
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) *p++ = static_cast<Scalar>(u(order[r], order[c]).real());
      }
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) *p++ = static_cast<Scalar>(u(order[r], order[c]).imag());
      }
      break;
    case ChannelInput::kNone: break;
  }
  if (layout.beams) {
    for (std::size_t r = 0; r < n; ++r) *p++ = static_cast<Scalar>(beams[order[r]]);
  }
}

/// Raw features of one slot in the layout's user order.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> extract_features(const FeatureLayout& layout,
                                                          const SchedulerContext& ctx) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x(layout.dim(ctx.num_users()));
  const auto order = user_order(layout, ctx.weights);
  write_features<Scalar>(layout, ctx.weights, ctx.channels.u, ctx.beam_index, order, x.data());
  return x;
}

/// Value compression applied before the affine step.
enum class BlockTransform { kIdentity, kLog10 };

inline const char* to_string(BlockTransform t) { return t == BlockTransform::kLog10 ? "log10" : "identity"; }

inline BlockTransform parse_transform(const std::string& s) {
  if (s == "log10") return BlockTransform::kLog10;
  if (s == "identity") return BlockTransform::kIdentity;
  throw std::runtime_error("unknown block transform '" + s + "'");
}

/// Weights and channel magnitudes span several decades; they are
/// log-compressed. Signed parts and beam indices are not.
inline std::array<BlockTransform, 3> default_transforms(const FeatureLayout& layout) {
  const bool magnitude = layout.channels == ChannelInput::kDiagonal || layout.channels == ChannelInput::kWhole;
  return {BlockTransform::kLog10, magnitude ? BlockTransform::kLog10 : BlockTransform::kIdentity,
          BlockTransform::kIdentity};
}

/// Floor applied before log10 (magnitudes of exactly zero).
inline constexpr double kLogFloor = 1e-30;

/// Per-block normalization: optional log10 compression, then the affine map
/// (x - mean) / std with one scalar pair per block, fitted on training data
/// only.
struct Normalizer {
  struct Block {
    int dim = 0;
    double mean = 0.0;
    double stddev = 1.0;
    BlockTransform transform = BlockTransform::kIdentity;
    bool operator==(const Block&) const = default;

    /// Applies the transform to `block` in place.
    template <typename Block>
    void compress(Block&& block) const {
      using Scalar = typename std::decay_t<Block>::Scalar;
      if (transform == BlockTransform::kLog10) block = block.max(static_cast<Scalar>(kLogFloor)).log10();
    }
  };
  std::vector<Block> blocks;

  bool operator==(const Normalizer&) const = default;

  [[nodiscard]] int dim() const {
    int d = 0;
    for (const auto& b : blocks) d += b.dim;
    return d;
  }

  /// Fits statistics on the columns of `x` (features x samples).
  template <typename Derived>
  static Normalizer fit(const FeatureLayout& layout, int num_users, const Eigen::MatrixBase<Derived>& x) {
    Normalizer norm;
    Eigen::Index row = 0;
    const auto dims = layout.block_dims(num_users);
    const auto transforms = default_transforms(layout);
    for (std::size_t k = 0; k < dims.size(); ++k) {
      const int d = dims[k];
      if (d == 0) continue;
      Block stats{d, 0.0, 1.0, transforms[k]};
      Eigen::ArrayXXd block = x.middleRows(row, d).template cast<double>().array();
      stats.compress(block.array());
      const double count = static_cast<double>(block.size());
      const double sum = block.sum();
      const double sum2 = block.square().sum();
      const double m = count > 0 ? sum / count : 0.0;
      const double var = count > 0 ? std::max(0.0, sum2 / count - m * m) : 0.0;
      const double sd = std::sqrt(var);
      stats.mean = m;
      stats.stddev = sd > 1e-300 ? sd : 1.0;
      norm.blocks.push_back(stats);
      row += d;
    }
    return norm;
  }

  /// In-place on every column of `x`.
  template <typename Derived>
  void apply(Eigen::MatrixBase<Derived>& x) const {
    using Scalar = typename Derived::Scalar;
    if (x.rows() != dim()) throw std::invalid_argument("normalizer dimension mismatch");
    Eigen::Index row = 0;
    for (const auto& b : blocks) {
      const auto m = static_cast<Scalar>(b.mean);
      const auto inv = static_cast<Scalar>(1.0 / b.stddev);
      b.compress(x.middleRows(row, b.dim).array());
      auto block = x.middleRows(row, b.dim).array();
      block = (block - m) * inv;
      row += b.dim;
    }
  }
};

}  // namespace mmw::ml

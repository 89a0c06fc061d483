#pragma once

// Training data for the learned selector: per short block, the scheduler's
// inputs (weights, complex effective channels, beam indices) and the greedy
// selection as a 0/1 target vector.
//
// File format (".mmwds"):
//   line 1  "mmw-dataset v1"
//   line 2  JSON header: num_users, max_selected, samples, scalar ("f32"),
//           byte_order, fields (order of the raw arrays below)
//   rest    raw arrays back to back, each sample-major:
//           episode (u32, n), weights (n*I), u_real (n*I*I), u_imag (n*I*I),
//           beams (n*I), targets (n*I)

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmw/experiment.hpp"
#include "mmw/ml/features.hpp"

namespace mmw::ml {

namespace io {

inline const char* native_byte_order() {
  return std::endian::native == std::endian::little ? "little" : "big";
}

template <typename T>
void write_array(std::ostream& os, const std::vector<T>& v) {
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
void read_array(std::istream& is, std::vector<T>& v, std::size_t count, const std::string& what) {
  v.resize(count);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(T)));
  if (!is) throw std::runtime_error("truncated file while reading " + what);
}

inline nlohmann::json read_header(std::istream& is, const std::string& magic, const std::string& path) {
  std::string line;
  if (!std::getline(is, line) || line != magic) {
    throw std::runtime_error(path + ": not a '" + magic + "' file");
  }
  if (!std::getline(is, line)) throw std::runtime_error(path + ": missing header");
  auto header = nlohmann::json::parse(line);
  if (header.value("byte_order", "") != native_byte_order()) {
    throw std::runtime_error(path + ": byte order " + header.value("byte_order", "?") +
                             " does not match this machine");
  }
  return header;
}

}  // namespace io

struct TrainingSet {
  int num_users = 0;
  int max_selected = 0;
  std::vector<std::uint32_t> episode;
  std::vector<float> weights;
  std::vector<float> u_real;
  std::vector<float> u_imag;
  std::vector<float> beams;
  std::vector<float> targets;

  [[nodiscard]] std::size_t size() const { return episode.size(); }

  void append(std::uint32_t ep, const SchedulerContext& ctx, const SelectionResult& result) {
    const int n = ctx.num_users();
    if (num_users == 0) {
      num_users = n;
      max_selected = ctx.max_selected;
    } else if (n != num_users) {
      throw std::invalid_argument("TrainingSet: user count changed between samples");
    }
    episode.push_back(ep);
    for (int i = 0; i < n; ++i) weights.push_back(static_cast<float>(ctx.weights[i]));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        u_real.push_back(static_cast<float>(ctx.channels.u(i, j).real()));
        u_imag.push_back(static_cast<float>(ctx.channels.u(i, j).imag()));
      }
    }
    for (int i = 0; i < n; ++i) beams.push_back(static_cast<float>(ctx.beam_index[i]));
    const std::size_t base = targets.size();
    targets.resize(base + static_cast<std::size_t>(n), 0.0f);
    if (result.feasible) {
      for (int i : result.selected) targets[base + i] = 1.0f;
    }
  }

  void append(const TrainingSet& other) {
    if (other.size() == 0) return;
    if (num_users == 0) {
      num_users = other.num_users;
      max_selected = other.max_selected;
    } else if (other.num_users != num_users) {
      throw std::invalid_argument("TrainingSet: cannot merge different user counts");
    }
    auto cat = [](auto& a, const auto& b) { a.insert(a.end(), b.begin(), b.end()); };
    cat(episode, other.episode);
    cat(weights, other.weights);
    cat(u_real, other.u_real);
    cat(u_imag, other.u_imag);
    cat(beams, other.beams);
    cat(targets, other.targets);
  }

  /// Raw feature of sample `s` into `out`.
  template <typename Scalar>
  void write_sample_features(const FeatureLayout& layout, std::size_t s, Scalar* out) const {
    const auto n = static_cast<std::size_t>(num_users);
    std::vector<double> w(n);
    std::vector<int> b(n);
    CMatrix u(num_users, num_users);
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = weights[s * n + i];
      b[i] = static_cast<int>(beams[s * n + i]);
      for (std::size_t j = 0; j < n; ++j) {
        u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = {
            u_real[(s * n + i) * n + j], u_imag[(s * n + i) * n + j]};
      }
    }
    write_features<Scalar>(layout, w, u, b, sample_order(layout, s), out);
  }

  /// Network presentation order of sample `s` (see user_order).
  [[nodiscard]] std::vector<int> sample_order(const FeatureLayout& layout, std::size_t s) const {
    const auto n = static_cast<std::size_t>(num_users);
    std::vector<double> w(weights.begin() + static_cast<std::ptrdiff_t>(s * n),
                          weights.begin() + static_cast<std::ptrdiff_t>((s + 1) * n));
    return user_order(layout, w);
  }

  /// Raw features of the given samples, one per column.
  template <typename Scalar>
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> feature_matrix(
      const FeatureLayout& layout, std::span<const std::size_t> samples) const {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> x(layout.dim(num_users),
                                                            static_cast<Eigen::Index>(samples.size()));
    for (std::size_t c = 0; c < samples.size(); ++c) {
      write_sample_features<Scalar>(layout, samples[c], x.col(static_cast<Eigen::Index>(c)).data());
    }
    return x;
  }

  /// Targets in the same user order as feature_matrix.
  template <typename Scalar>
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> target_matrix(
      const FeatureLayout& layout, std::span<const std::size_t> samples) const {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> t(num_users, static_cast<Eigen::Index>(samples.size()));
    for (std::size_t c = 0; c < samples.size(); ++c) {
      const auto order = sample_order(layout, samples[c]);
      for (int r = 0; r < num_users; ++r) {
        t(r, static_cast<Eigen::Index>(c)) = static_cast<Scalar>(targets[samples[c] * num_users + order[r]]);
      }
    }
    return t;
  }

  /// Splits sample indices by episode: the last `fraction` of distinct
  /// episodes (at least one when fraction > 0 and there are >= 2) is held out.
  [[nodiscard]] std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split(double fraction) const {
    std::uint32_t max_ep = 0;
    for (auto e : episode) max_ep = std::max(max_ep, e);
    std::vector<std::uint32_t> distinct(episode.begin(), episode.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::size_t held = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(distinct.size())));
    if (fraction > 0.0 && held == 0 && distinct.size() >= 2) held = 1;
    if (held >= distinct.size()) held = distinct.size() > 1 ? distinct.size() - 1 : 0;
    const std::uint32_t cut = held == 0 ? max_ep + 1 : distinct[distinct.size() - held];
    std::vector<std::size_t> train, val;
    for (std::size_t s = 0; s < size(); ++s) (episode[s] < cut ? train : val).push_back(s);
    return {std::move(train), std::move(val)};
  }
};

/// Runs `episodes` episodes with greedy acting and records every slot.
inline TrainingSet generate_dataset(const SystemConfig& cfg, const Codebook& codebook,
                                    std::size_t episodes, SeedStream stream = SeedStream::kTrain,
                                    int jobs = 1, std::size_t first_episode = 0) {
  std::vector<TrainingSet> parts(episodes);
  const NamedScheduler greedy = builtin_scheduler("greedy");
  parallel_for(episodes, jobs, [&](std::size_t k) {
    const std::size_t idx = first_episode + k;
    EpisodeOptions opts;
    TrainingSet& part = parts[k];
    opts.observer = [&part, idx](const SlotObservation& obs) {
      part.append(static_cast<std::uint32_t>(idx), obs.context, obs.result);
    };
    run_episode(episode_seed(cfg, stream, idx), cfg, codebook, greedy, idx, opts);
  });
  TrainingSet out;
  out.num_users = cfg.num_users;
  out.max_selected = cfg.max_selected;
  for (const auto& p : parts) out.append(p);
  return out;
}

inline void save_dataset(const std::filesystem::path& path, const TrainingSet& ds) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  nlohmann::json header{{"num_users", ds.num_users},
                        {"max_selected", ds.max_selected},
                        {"samples", ds.size()},
                        {"scalar", "f32"},
                        {"byte_order", io::native_byte_order()},
                        {"fields", {"episode:u32", "weights", "u_real", "u_imag", "beams", "targets"}}};
  os << "mmw-dataset v1\n" << header.dump() << '\n';
  io::write_array(os, ds.episode);
  io::write_array(os, ds.weights);
  io::write_array(os, ds.u_real);
  io::write_array(os, ds.u_imag);
  io::write_array(os, ds.beams);
  io::write_array(os, ds.targets);
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

inline TrainingSet load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open dataset " + path.string());
  const auto header = io::read_header(is, "mmw-dataset v1", path.string());
  if (header.value("scalar", "") != "f32") throw std::runtime_error(path.string() + ": unsupported scalar type");
  TrainingSet ds;
  ds.num_users = header.at("num_users").get<int>();
  ds.max_selected = header.at("max_selected").get<int>();
  const auto n = header.at("samples").get<std::size_t>();
  const auto users = static_cast<std::size_t>(ds.num_users);
  io::read_array(is, ds.episode, n, "episode");
  io::read_array(is, ds.weights, n * users, "weights");
  io::read_array(is, ds.u_real, n * users * users, "u_real");
  io::read_array(is, ds.u_imag, n * users * users, "u_imag");
  io::read_array(is, ds.beams, n * users, "beams");
  io::read_array(is, ds.targets, n * users, "targets");
  return ds;
}

}  // namespace mmw::ml

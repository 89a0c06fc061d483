#pragma once

// Learned user selector: model bundle (layout + normalization + network),
// training, inference (threshold, reverse top-k pruning, fallback) and
// model files.
//
// Model file (".mmwnn"):
//   line 1  "mmw-selector v1"
//   line 2  JSON header: scalar ("f32"/"f64"), byte_order, layer_sizes,
//           hidden_activation, output_activation, inputs, user_order, num_users,
//           normalization [{dim, mean, stddev, transform}...], parameter_layout
//   rest    per layer: weight (out x in, column-major) then bias (out)

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmw/ml/dataset.hpp"
#include "mmw/ml/features.hpp"
#include "mmw/ml/network.hpp"
#include "mmw/schedulers.hpp"

namespace mmw::ml {

template <typename Scalar>
struct SelectorModel {
  using Network = SelectorNetwork<Scalar>;
  using Vector = typename Network::Vector;

  FeatureLayout layout;
  int num_users = 0;
  Normalizer normalizer;
  Network network;

  /// Normalized network input for one slot.
  [[nodiscard]] typename Network::Matrix features(const SchedulerContext& ctx) const {
    if (ctx.num_users() != num_users) {
      throw std::invalid_argument("model expects " + std::to_string(num_users) + " users, context has " +
                                  std::to_string(ctx.num_users()));
    }
    typename Network::Matrix x = extract_features<Scalar>(layout, ctx);
    if (x.rows() != network.input_dim()) throw std::invalid_argument("feature dimension mismatch");
    normalizer.apply(x);
    return x;
  }

  /// Sigmoid outputs, indexed by user id.
  [[nodiscard]] std::vector<double> probabilities(const SchedulerContext& ctx) const {
    const auto out = network.forward(features(ctx));
    const auto order = user_order(layout, ctx.weights);
    std::vector<double> p(static_cast<std::size_t>(out.rows()));
    for (Eigen::Index r = 0; r < out.rows(); ++r) p[order[r]] = static_cast<double>(out(r, 0));
    return p;
  }
};

template <typename Scalar>
SelectorModel<Scalar> make_model(const FeatureLayout& layout, int num_users,
                                 const std::vector<int>& hidden, std::uint64_t seed) {
  std::vector<int> sizes{layout.dim(num_users)};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(num_users);
  SelectorModel<Scalar> m;
  m.layout = layout;
  m.num_users = num_users;
  m.network = SelectorNetwork<Scalar>(sizes, seed);
  // Unit affine map until fitted.
  const auto dims = layout.block_dims(num_users);
  const auto transforms = default_transforms(layout);
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (dims[k] > 0) m.normalizer.blocks.push_back({dims[k], 0.0, 1.0, transforms[k]});
  }
  return m;
}

inline constexpr double kSelectionThreshold = 0.5;

/// 0/1 decision per output.
inline std::vector<int> round_outputs(std::span<const double> probabilities) {
  std::vector<int> a(probabilities.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = probabilities[i] >= kSelectionThreshold ? 1 : 0;
  return a;
}

/// Turns per-user probabilities into a transmission decision: threshold,
/// then drop the lowest interference-free score one at a time while the
/// set exceeds N_max; an empty set falls back to the top-1 user.
///
/// With `prune_singular` the same removal also continues while the set has
/// no usable ZF precoder. Off by default: a singular set then transmits
/// nothing that slot.
inline SelectionResult select_from_probabilities(std::span<const double> probabilities,
                                                 const SchedulerContext& ctx, bool prune_singular = false) {
  ctx.validate();
  if (static_cast<int>(probabilities.size()) != ctx.num_users()) {
    throw std::invalid_argument("select_from_probabilities: output size does not match user count");
  }
  const auto scores = interference_free_scores(ctx);
  const auto decision = round_outputs(probabilities);
  std::vector<int> chosen;
  for (int i = 0; i < ctx.num_users(); ++i) {
    if (decision[i]) chosen.push_back(i);
  }
  auto must_shrink = [&] {
    if (static_cast<int>(chosen.size()) > ctx.max_selected) return true;
    return prune_singular && chosen.size() > 1 &&
           !zf_objective(ctx.channels, ctx.gram, chosen, ctx.weights).has_value();
  };
  while (must_shrink()) {
    // Lowest score goes first; among equal scores the higher index goes.
    auto worst = chosen.begin();
    for (auto it = chosen.begin(); it != chosen.end(); ++it) {
      if (scores[*it] <= scores[*worst]) worst = it;
    }
    chosen.erase(worst);
  }
  if (chosen.empty()) chosen.push_back(rank_by_score(scores).front());
  return zf_evaluate(ctx.channels, ctx.gram, chosen, ctx.weights);
}

template <typename Scalar>
SelectionResult infer_selection(const SelectorModel<Scalar>& model, const SchedulerContext& ctx,
                                bool prune_singular = false) {
  return select_from_probabilities(model.probabilities(ctx), ctx, prune_singular);
}

/// 1 - sum_i |pred_i - target_i| / I.
inline double element_accuracy(std::span<const int> predicted, std::span<const int> target) {
  if (predicted.size() != target.size()) throw std::invalid_argument("element_accuracy: length mismatch");
  if (predicted.empty()) throw std::invalid_argument("element_accuracy: empty vectors");
  double miss = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) miss += std::abs(predicted[i] - target[i]);
  return 1.0 - miss / static_cast<double>(predicted.size());
}

/// Mean element accuracy of rounded network outputs against 0/1 targets.
template <typename Scalar, typename DerivedP, typename DerivedT>
double mean_element_accuracy(const Eigen::MatrixBase<DerivedP>& probabilities,
                             const Eigen::MatrixBase<DerivedT>& targets) {
  if (probabilities.cols() == 0) return 0.0;
  double total = 0.0;
  for (Eigen::Index c = 0; c < probabilities.cols(); ++c) {
    double miss = 0.0;
    for (Eigen::Index r = 0; r < probabilities.rows(); ++r) {
      const int a = static_cast<double>(probabilities(r, c)) >= kSelectionThreshold ? 1 : 0;
      miss += std::abs(a - static_cast<double>(targets(r, c)));
    }
    total += 1.0 - miss / static_cast<double>(probabilities.rows());
  }
  return total / static_cast<double>(probabilities.cols());
}

struct TrainOptions {
  int epochs = 50;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int batch_size = 256;
  double weight_decay = 0.0;
  double validation_fraction = 0.05;
  std::uint64_t shuffle_seed = 0;

  /// Refit normalization on the training split (false when resuming).
  bool fit_normalizer = true;
  std::function<void(int, double, double, double)> on_epoch;  // epoch, train loss, val loss, val acc

  static TrainOptions from_config(const SystemConfig& cfg) {
    TrainOptions o;
    o.epochs = cfg.ml_epochs;
    o.learning_rate = cfg.ml_learning_rate;
    o.beta1 = cfg.ml_beta1;
    o.beta2 = cfg.ml_beta2;
    o.batch_size = cfg.ml_batch_size;
    o.validation_fraction = cfg.ml_validation_fraction;
    o.weight_decay = cfg.ml_weight_decay;
    o.shuffle_seed = derive_seed(cfg.seed, SeedStream::kShuffle, 0);
    return o;
  }
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double validation_accuracy = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> curve;
  std::size_t train_samples = 0;
  std::size_t validation_samples = 0;
  double initial_train_loss = 0.0;  // before the first update
};

/// Mini-batch Adam on mean BCE. Validation = last episodes of the set.
template <typename Scalar>
TrainReport train(SelectorModel<Scalar>& model, const TrainingSet& data, const TrainOptions& options) {
  using Matrix = typename SelectorNetwork<Scalar>::Matrix;
  if (data.size() == 0) throw TrainingError("train: empty dataset");
  if (data.num_users != model.num_users) throw TrainingError("train: dataset and model user counts differ");
  if (options.batch_size < 1) throw TrainingError("train: batch size must be >= 1");

  const auto [train_idx, val_idx] = data.split(options.validation_fraction);
  if (train_idx.empty()) throw TrainingError("train: no training samples after the validation split");

  Matrix x_train = data.template feature_matrix<Scalar>(model.layout, train_idx);
  if (options.fit_normalizer) model.normalizer = Normalizer::fit(model.layout, model.num_users, x_train);
  model.normalizer.apply(x_train);
  const Matrix t_train = data.template target_matrix<Scalar>(model.layout, train_idx);
  Matrix x_val = data.template feature_matrix<Scalar>(model.layout, val_idx);
  if (x_val.cols() > 0) model.normalizer.apply(x_val);
  const Matrix t_val = data.template target_matrix<Scalar>(model.layout, val_idx);

  TrainReport report;
  report.train_samples = train_idx.size();
  report.validation_samples = val_idx.size();
  report.initial_train_loss = static_cast<double>(model.network.loss(x_train, t_train));

  AdamOptimizer<Scalar> adam(model.network, {options.learning_rate, options.beta1, options.beta2, 1e-8, options.weight_decay});
  typename SelectorNetwork<Scalar>::Gradients grads;
  Rng rng(options.shuffle_seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x_train.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Matrix xb, tb;

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(options.batch_size)) {
      const auto len = static_cast<Eigen::Index>(
          std::min<std::size_t>(static_cast<std::size_t>(options.batch_size), order.size() - start));
      xb.resize(x_train.rows(), len);
      tb.resize(t_train.rows(), len);
      for (Eigen::Index c = 0; c < len; ++c) {
        const Eigen::Index src = order[start + static_cast<std::size_t>(c)];
        xb.col(c) = x_train.col(src);
        tb.col(c) = t_train.col(src);
      }
      const double loss = static_cast<double>(model.network.loss_and_gradients(xb, tb, grads));
      if (!std::isfinite(loss)) {
        std::ostringstream os;
        os << "training diverged (loss " << loss << ") at epoch " << epoch
           << "; try a smaller learning rate (now " << options.learning_rate
           << ") or check the input normalization";
        throw TrainingError(os.str());
      }
      loss_sum += loss * static_cast<double>(len);
      adam.step(model.network, grads);
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(order.size());
    if (x_val.cols() > 0) {
      const Matrix logits = model.network.logits(x_val);
      stats.validation_loss = static_cast<double>(SelectorNetwork<Scalar>::bce_with_logits(logits, t_val));
      stats.validation_accuracy =
          mean_element_accuracy<Scalar>(SelectorNetwork<Scalar>::sigmoid(logits), t_val);
    }
    report.curve.push_back(stats);
    if (options.on_epoch) {
      options.on_epoch(epoch, stats.train_loss, stats.validation_loss, stats.validation_accuracy);
    }
  }
  if (!model.network.all_finite()) throw TrainingError("training produced non-finite parameters");
  return report;
}

/// Element accuracy of the model's rounded outputs on every sample of `data`.
template <typename Scalar>
double dataset_accuracy(const SelectorModel<Scalar>& model, const TrainingSet& data) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  auto x = data.template feature_matrix<Scalar>(model.layout, all);
  model.normalizer.apply(x);
  const auto t = data.template target_matrix<Scalar>(model.layout, all);
  return mean_element_accuracy<Scalar>(model.network.forward(x), t);
}

template <typename Scalar>
constexpr const char* scalar_tag() {
  if constexpr (std::is_same_v<Scalar, float>) return "f32";
  else return "f64";
}

template <typename Scalar>
void save_model(const std::filesystem::path& path, const SelectorModel<Scalar>& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  nlohmann::json norm = nlohmann::json::array();
  for (const auto& b : model.normalizer.blocks) {
    norm.push_back({{"dim", b.dim}, {"mean", b.mean}, {"stddev", b.stddev}, {"transform", to_string(b.transform)}});
  }
  nlohmann::json header{{"scalar", scalar_tag<Scalar>()},
                        {"byte_order", io::native_byte_order()},
                        {"layer_sizes", model.network.sizes()},
                        {"hidden_activation", "relu"},
                        {"output_activation", "sigmoid"},
                        {"inputs", model.layout.to_string()},
                        {"user_order", model.layout.weights ? "weight_desc" : "index"},
                        {"num_users", model.num_users},
                        {"normalization", norm},
                        {"parameter_layout", "per layer: weight out x in column-major, then bias"}};
  os << "mmw-selector v1\n" << header.dump() << '\n';
  for (const auto& l : model.network.layers()) {
    os.write(reinterpret_cast<const char*>(l.weight.data()),
             static_cast<std::streamsize>(l.weight.size() * sizeof(Scalar)));
    os.write(reinterpret_cast<const char*>(l.bias.data()),
             static_cast<std::streamsize>(l.bias.size() * sizeof(Scalar)));
  }
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

template <typename Scalar>
SelectorModel<Scalar> load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open model " + path.string());
  const auto header = io::read_header(is, "mmw-selector v1", path.string());
  if (header.value("scalar", "") != scalar_tag<Scalar>()) {
    throw std::runtime_error(path.string() + ": model scalar type is " + header.value("scalar", "?"));
  }
  if (header.value("hidden_activation", "") != "relu" || header.value("output_activation", "") != "sigmoid") {
    throw std::runtime_error(path.string() + ": unsupported activation");
  }
  SelectorModel<Scalar> m;
  m.layout = FeatureLayout::parse(header.at("inputs").get<std::string>());
  if (header.value("user_order", "") != (m.layout.weights ? "weight_desc" : "index")) {
    throw std::runtime_error(path.string() + ": unsupported user_order");
  }
  m.num_users = header.at("num_users").get<int>();
  for (const auto& b : header.at("normalization")) {
    m.normalizer.blocks.push_back({b.at("dim").get<int>(), b.at("mean").get<double>(), b.at("stddev").get<double>(),
                                   parse_transform(b.value("transform", "identity"))});
  }
  const auto sizes = header.at("layer_sizes").get<std::vector<int>>();
  m.network = SelectorNetwork<Scalar>(sizes, 0);
  for (auto& l : m.network.layers()) {
    is.read(reinterpret_cast<char*>(l.weight.data()), static_cast<std::streamsize>(l.weight.size() * sizeof(Scalar)));
    is.read(reinterpret_cast<char*>(l.bias.data()), static_cast<std::streamsize>(l.bias.size() * sizeof(Scalar)));
  }
  if (!is) throw std::runtime_error(path.string() + ": truncated parameters");
  if (m.layout.dim(m.num_users) != sizes.front() || sizes.back() != m.num_users ||
      m.normalizer.dim() != sizes.front()) {
    throw std::runtime_error(path.string() + ": inconsistent header");
  }
  return m;
}

/// Scheduler adapter; the model is shared read-only.
template <typename Scalar>
NamedScheduler ml_scheduler(std::shared_ptr<const SelectorModel<Scalar>> model, std::string name = "ml",
                            bool prune_singular = false) {
  return {std::move(name), [model, prune_singular](const SchedulerContext& ctx) {
            return infer_selection(*model, ctx, prune_singular);
          }};
}

}  // namespace mmw::ml

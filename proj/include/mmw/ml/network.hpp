#pragma once

// Fully connected selector network: ReLU hidden layers, one sigmoid output
// per user, trained with mean binary cross entropy and Adam.
//
// Batches are column-major: one sample per column.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mmw/common.hpp"

namespace mmw::ml {

template <typename Scalar>
class SelectorNetwork {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct Layer {
    Matrix weight;  // out x in
    Vector bias;    // out
  };

  struct Gradients {
    std::vector<Matrix> weight;
    std::vector<Vector> bias;
  };

  SelectorNetwork() = default;

  /// `sizes` = [input, hidden..., output]. He-uniform initialization.
  SelectorNetwork(std::vector<int> sizes, std::uint64_t seed) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw std::invalid_argument("network needs input and output sizes");
    for (int s : sizes_) {
      if (s < 1) throw std::invalid_argument("layer sizes must be >= 1");
    }
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      Layer layer;
      const int in = sizes_[l];
      const int out = sizes_[l + 1];
      const double bound = std::sqrt(6.0 / in);
      std::uniform_real_distribution<double> dist(-bound, bound);
      layer.weight.resize(out, in);
      for (Eigen::Index c = 0; c < in; ++c) {
        for (Eigen::Index r = 0; r < out; ++r) layer.weight(r, c) = static_cast<Scalar>(dist(rng));
      }
      layer.bias = Vector::Zero(out);
      layers_.push_back(std::move(layer));
    }
  }

  [[nodiscard]] const std::vector<int>& sizes() const { return sizes_; }
  [[nodiscard]] int input_dim() const { return sizes_.front(); }
  [[nodiscard]] int output_dim() const { return sizes_.back(); }
  [[nodiscard]] std::vector<Layer>& layers() { return layers_; }
  [[nodiscard]] const std::vector<Layer>& layers() const { return layers_; }

  [[nodiscard]] std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  [[nodiscard]] bool all_finite() const {
    for (const auto& l : layers_) {
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    }
    return true;
  }

  /// Output-layer pre-activations.
  [[nodiscard]] Matrix logits(const Matrix& x) const {
    check_input(x);
    Matrix a = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Matrix z = layers_[l].weight * a;
      z.colwise() += layers_[l].bias;
      if (l + 1 < layers_.size()) z = z.cwiseMax(Scalar(0));
      a = std::move(z);
    }
    return a;
  }

  /// Sigmoid outputs in (0, 1).
  [[nodiscard]] Matrix forward(const Matrix& x) const { return sigmoid(logits(x)); }

  /// Mean binary cross entropy over all batch x output elements.
  [[nodiscard]] Scalar loss(const Matrix& x, const Matrix& targets) const {
    return bce_with_logits(logits(x), targets);
  }

  /// Loss plus analytic gradients of it w.r.t. every weight and bias.
  Scalar loss_and_gradients(const Matrix& x, const Matrix& targets, Gradients& grads) const {
    check_input(x);
    const std::size_t depth = layers_.size();
    std::vector<Matrix> activations;  // inputs to each layer
    activations.reserve(depth);
    activations.push_back(x);
    Matrix z;
    for (std::size_t l = 0; l < depth; ++l) {
      z = layers_[l].weight * activations.back();
      z.colwise() += layers_[l].bias;
      if (l + 1 < depth) activations.push_back(z.cwiseMax(Scalar(0)));
    }
    if (targets.rows() != z.rows() || targets.cols() != z.cols()) {
      throw std::invalid_argument("target shape does not match network output");
    }
    const Scalar loss_value = bce_with_logits(z, targets);

    grads.weight.resize(depth);
    grads.bias.resize(depth);
    const Scalar scale = Scalar(1) / static_cast<Scalar>(z.size());
    Matrix delta = (sigmoid(z) - targets) * scale;
    for (std::size_t l = depth; l-- > 0;) {
      grads.weight[l].noalias() = delta * activations[l].transpose();
      grads.bias[l] = delta.rowwise().sum();
      if (l > 0) {
        Matrix back = layers_[l].weight.transpose() * delta;
        delta = back.cwiseProduct(
            (activations[l].array() > Scalar(0)).template cast<Scalar>().matrix());
      }
    }
    return loss_value;
  }

  static Matrix sigmoid(const Matrix& z) {
    return z.unaryExpr([](Scalar v) {
      if (v >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-v));
      const Scalar e = std::exp(v);
      return e / (Scalar(1) + e);
    });
  }

  /// Numerically stable mean BCE on logits:
  /// max(z,0) - z t + log(1 + exp(-|z|)).
  static Scalar bce_with_logits(const Matrix& z, const Matrix& t) {
    if (z.rows() != t.rows() || z.cols() != t.cols()) {
      throw std::invalid_argument("target shape does not match network output");
    }
    const auto za = z.array();
    const auto per = za.cwiseMax(Scalar(0)) - za * t.array() + (-za.abs()).exp().log1p();
    return per.sum() / static_cast<Scalar>(z.size());
  }

 private:
  void check_input(const Matrix& x) const {
    if (layers_.empty()) throw std::logic_error("network has no layers");
    if (x.rows() != sizes_.front()) {
      throw std::invalid_argument("input dimension " + std::to_string(x.rows()) +
                                  " does not match network input " + std::to_string(sizes_.front()));
    }
  }

  std::vector<int> sizes_;
  std::vector<Layer> layers_;
};

/// Adam with bias correction.
template <typename Scalar>
class AdamOptimizer {
 public:
  using Network = SelectorNetwork<Scalar>;

  struct Options {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;  // decoupled, weights only
  };

  AdamOptimizer(const Network& net, Options options) : options_(options) {
    for (const auto& l : net.layers()) {
      m_w_.push_back(Network::Matrix::Zero(l.weight.rows(), l.weight.cols()));
      v_w_.push_back(Network::Matrix::Zero(l.weight.rows(), l.weight.cols()));
      m_b_.push_back(Network::Vector::Zero(l.bias.size()));
      v_b_.push_back(Network::Vector::Zero(l.bias.size()));
    }
  }

  void step(Network& net, const typename Network::Gradients& g) {
    ++t_;
    const auto b1 = static_cast<Scalar>(options_.beta1);
    const auto b2 = static_cast<Scalar>(options_.beta2);
    const auto eps = static_cast<Scalar>(options_.epsilon);
    const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
    const auto lr = static_cast<Scalar>(options_.learning_rate * std::sqrt(c2) / c1);
    auto& layers = net.layers();
    const auto decay = static_cast<Scalar>(1.0 - options_.learning_rate * options_.weight_decay);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (options_.weight_decay > 0.0) layers[l].weight *= decay;
      update(layers[l].weight, g.weight[l], m_w_[l], v_w_[l], b1, b2, eps, lr);
      update(layers[l].bias, g.bias[l], m_b_[l], v_b_[l], b1, b2, eps, lr);
    }
  }

  [[nodiscard]] long steps() const { return t_; }

 private:
  template <typename P>
  static void update(P& param, const P& grad, P& m, P& v, Scalar b1, Scalar b2, Scalar eps, Scalar lr) {
    m = b1 * m + (Scalar(1) - b1) * grad;
    v = b2 * v + (Scalar(1) - b2) * grad.cwiseProduct(grad);
    param.array() -= lr * m.array() / (v.array().sqrt() + eps);
  }

  Options options_;
  long t_ = 0;
  std::vector<typename Network::Matrix> m_w_, v_w_;
  std::vector<typename Network::Vector> m_b_, v_b_;
};

}  // namespace mmw::ml

#pragma once

// Dense MLP core: fully connected stacks with ReLU/identity activations,
// reverse-mode gradients for the losses used in training, and Adam.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lsvos/errors.hpp"
#include "lsvos/rng.hpp"

namespace lsvos {

/// Batches are row-major: one sample per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint8_t { identity = 0, relu = 1 };

struct DenseLayer {
  Matrix weight;  // out x in
  RowVector bias;  // out
  Activation activation = Activation::identity;

  std::size_t in_dim() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight.rows()); }
};

class DenseNet {
 public:
  DenseNet() = default;

  /// Zero-initialized net. `dims` has one more entry than `activations`.
  DenseNet(const std::vector<std::size_t>& dims, const std::vector<Activation>& activations) {
    if (dims.size() < 2 || activations.size() + 1 != dims.size()) {
      throw InvalidInput("DenseNet: need n+1 dims for n activations (n >= 1)");
    }
    for (std::size_t d : dims) {
      if (d == 0) throw InvalidInput("DenseNet: layer dims must be positive");
    }
    layers_.reserve(activations.size());
    for (std::size_t i = 0; i < activations.size(); ++i) {
      DenseLayer layer;
      layer.weight = Matrix::Zero(static_cast<Eigen::Index>(dims[i + 1]),
                                  static_cast<Eigen::Index>(dims[i]));
      layer.bias = RowVector::Zero(static_cast<Eigen::Index>(dims[i + 1]));
      layer.activation = activations[i];
      layers_.push_back(std::move(layer));
    }
  }

  /// ReLU on every hidden layer, identity on the last.
  static std::vector<Activation> mlp_activations(std::size_t n_layers) {
    std::vector<Activation> acts(n_layers, Activation::relu);
    if (!acts.empty()) acts.back() = Activation::identity;
    return acts;
  }

  /// Weights uniform in [-a, a], a = sqrt(6 / (fan_in + fan_out)); zero biases.
  static DenseNet glorot(const std::vector<std::size_t>& dims,
                         const std::vector<Activation>& activations, Rng& rng) {
    DenseNet net(dims, activations);
    for (auto& layer : net.layers_) {
      const double a = std::sqrt(6.0 / static_cast<double>(layer.in_dim() + layer.out_dim()));
      for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
        layer.weight.data()[i] = rng.uniform(-a, a);
      }
    }
    return net;
  }

  std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
  std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }
  std::size_t depth() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }

  std::vector<std::size_t> dims() const {
    std::vector<std::size_t> out;
    if (layers_.empty()) return out;
    out.push_back(input_dim());
    for (const auto& l : layers_) out.push_back(l.out_dim());
    return out;
  }

  std::vector<Activation> activations() const {
    std::vector<Activation> out;
    for (const auto& l : layers_) out.push_back(l.activation);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  DenseLayer& layer(std::size_t i) { return layers_.at(i); }
  const DenseLayer& layer(std::size_t i) const { return layers_.at(i); }

  bool all_finite() const {
    return std::all_of(layers_.begin(), layers_.end(), [](const DenseLayer& l) {
      return l.weight.allFinite() && l.bias.allFinite();
    });
  }

  /// Flat copy of all parameters, layer by layer, weights (row-major) then bias.
  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& l : layers_) {
      out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
      out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
    }
    return out;
  }

  friend bool operator==(const DenseNet& a, const DenseNet& b) {
    if (a.dims() != b.dims() || a.activations() != b.activations()) return false;
    return a.flatten() == b.flatten();
  }

 private:
  std::vector<DenseLayer> layers_;
};

namespace detail {

inline void apply_activation(Matrix& z, Activation act) {
  if (act == Activation::relu) z = z.cwiseMax(0.0);
}

inline void check_input(const DenseNet& net, const Matrix& batch) {
  if (net.empty()) throw InvalidInput("forward: empty network");
  if (static_cast<std::size_t>(batch.cols()) != net.input_dim()) {
    throw InvalidInput("forward: batch has " + std::to_string(batch.cols()) +
                       " columns, network expects " + std::to_string(net.input_dim()));
  }
}

}  // namespace detail

/// Applies every layer (affine map then activation) to each row of `batch`.
inline Matrix forward(const DenseNet& net, const Matrix& batch) {
  detail::check_input(net, batch);
  Matrix x = batch;
  for (const auto& layer : net.layers()) {
    Matrix z(x.rows(), layer.weight.rows());
    z.noalias() = x * layer.weight.transpose();
    z.rowwise() += layer.bias;
    detail::apply_activation(z, layer.activation);
    x = std::move(z);
  }
  return x;
}

/// Per-layer inputs and pre-activations kept for the backward pass.
struct ForwardCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> preactivations;
  Matrix output;
};

inline ForwardCache forward_cached(const DenseNet& net, const Matrix& batch) {
  detail::check_input(net, batch);
  ForwardCache cache;
  cache.inputs.reserve(net.depth());
  cache.preactivations.reserve(net.depth());
  Matrix x = batch;
  for (std::size_t i = 0; i < net.depth(); ++i) {
    const auto& layer = net.layer(i);
    Matrix z(x.rows(), layer.weight.rows());
    z.noalias() = x * layer.weight.transpose();
    z.rowwise() += layer.bias;
    if (!z.allFinite()) {
      throw NumericalFailure("non-finite pre-activation in layer " + std::to_string(i));
    }
    cache.inputs.push_back(std::move(x));
    x = z;
    detail::apply_activation(x, layer.activation);
    cache.preactivations.push_back(std::move(z));
  }
  cache.output = std::move(x);
  return cache;
}

/// Gradient storage shaped like a DenseNet's parameters.
struct NetGradients {
  std::vector<Matrix> weight;
  std::vector<RowVector> bias;

  static NetGradients zeros_like(const DenseNet& net) {
    NetGradients g;
    for (const auto& l : net.layers()) {
      g.weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
      g.bias.push_back(RowVector::Zero(l.bias.size()));
    }
    return g;
  }

  NetGradients& operator*=(double s) {
    for (auto& w : weight) w *= s;
    for (auto& b : bias) b *= s;
    return *this;
  }

  bool all_zero() const {
    return std::all_of(weight.begin(), weight.end(), [](const Matrix& m) { return m.isZero(0.0); }) &&
           std::all_of(bias.begin(), bias.end(), [](const RowVector& b) { return b.isZero(0.0); });
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < weight.size(); ++i) {
      out.insert(out.end(), weight[i].data(), weight[i].data() + weight[i].size());
      out.insert(out.end(), bias[i].data(), bias[i].data() + bias[i].size());
    }
    return out;
  }
};

struct BackwardResult {
  NetGradients grads;
  Matrix input_grad;  // dL/d(batch), for chaining nets (decoder -> encoder)
};

/// Reverse pass given dL/d(output).
inline BackwardResult backward(const DenseNet& net, const ForwardCache& cache,
                               const Matrix& output_grad) {
  if (output_grad.rows() != cache.output.rows() || output_grad.cols() != cache.output.cols()) {
    throw InvalidInput("backward: output gradient shape mismatch");
  }
  BackwardResult r;
  r.grads.weight.resize(net.depth());
  r.grads.bias.resize(net.depth());
  Matrix delta = output_grad;
  for (std::size_t k = net.depth(); k-- > 0;) {
    const auto& layer = net.layer(k);
    if (layer.activation == Activation::relu) {
      delta = (cache.preactivations[k].array() > 0.0).select(delta, 0.0);
    }
    r.grads.weight[k].noalias() = delta.transpose() * cache.inputs[k];
    r.grads.bias[k] = delta.colwise().sum();
    Matrix upstream(delta.rows(), layer.weight.cols());
    upstream.noalias() = delta * layer.weight;
    if (!upstream.allFinite()) {
      throw NumericalFailure("non-finite gradient in layer " + std::to_string(k));
    }
    delta = std::move(upstream);
  }
  r.input_grad = std::move(delta);
  return r;
}

// ---------------------------------------------------------------------------
// Losses. Every loss is a mean over the batch so its scale does not depend on
// batch size.

enum class LossKind {
  mse,                  // mean over rows and columns of (out - target)^2
  uncertainty_sigmoid,  // mean_ood[-sigmoid(f)] + mean_id[-(1 - sigmoid(f))]
  uncertainty_bce,      // mean_ood[-log sigmoid(f)] + mean_id[-log(1 - sigmoid(f))]
  cross_entropy,        // mean over rows of -log softmax(logits)[label]
};

/// Regression targets for mse, per-row OOD flags for the uncertainty losses,
/// class indices for cross-entropy.
using LossTargets = std::variant<Matrix, std::vector<std::uint8_t>, std::vector<int>>;

struct LossValue {
  double value = 0.0;
  Matrix output_grad;
};

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline LossValue mse_loss(const Matrix& output, const Matrix& target) {
  if (output.rows() != target.rows() || output.cols() != target.cols()) {
    throw InvalidInput("mse: target shape mismatch");
  }
  if (output.size() == 0) throw InvalidInput("mse: empty batch");
  const double n = static_cast<double>(output.size());
  Matrix diff = output - target;
  LossValue lv;
  lv.value = diff.squaredNorm() / n;
  lv.output_grad = (2.0 / n) * diff;
  return lv;
}

/// Two-term uncertainty loss over a single-column output. `is_ood[i]`
/// selects the term row i contributes to; a side with no rows is dropped.
inline LossValue uncertainty_loss_from_scores(const Matrix& output,
                                              const std::vector<std::uint8_t>& is_ood,
                                              bool log_form) {
  if (output.cols() != 1) throw InvalidInput("uncertainty loss: head must emit one column");
  if (static_cast<std::size_t>(output.rows()) != is_ood.size()) {
    throw InvalidInput("uncertainty loss: label count mismatch");
  }
  const auto n_ood = static_cast<double>(std::count(is_ood.begin(), is_ood.end(), 1));
  const auto n_id = static_cast<double>(is_ood.size()) - n_ood;
  if (is_ood.empty()) throw InvalidInput("uncertainty loss: no rows");
  LossValue lv;
  lv.output_grad = Matrix::Zero(output.rows(), 1);
  for (Eigen::Index i = 0; i < output.rows(); ++i) {
    const double f = output(i, 0);
    const double s = sigmoid(f);
    if (is_ood[static_cast<std::size_t>(i)]) {
      if (log_form) {
        lv.value += softplus(-f) / n_ood;
        lv.output_grad(i, 0) = (s - 1.0) / n_ood;
      } else {
        lv.value += -s / n_ood;
        lv.output_grad(i, 0) = -s * (1.0 - s) / n_ood;
      }
    } else {
      if (log_form) {
        lv.value += softplus(f) / n_id;
        lv.output_grad(i, 0) = s / n_id;
      } else {
        lv.value += -(1.0 - s) / n_id;
        lv.output_grad(i, 0) = s * (1.0 - s) / n_id;
      }
    }
  }
  return lv;
}

/// Row-wise softmax, max-shifted.
inline Matrix softmax(const Matrix& logits) {
  Matrix p = logits;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double m = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

inline LossValue cross_entropy_loss(const Matrix& logits, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw InvalidInput("cross-entropy: label count mismatch");
  }
  if (labels.empty()) throw InvalidInput("cross-entropy: empty batch");
  const double n = static_cast<double>(labels.size());
  LossValue lv;
  lv.output_grad = softmax(logits);
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= logits.cols()) throw InvalidInput("cross-entropy: label out of range");
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    lv.value += (lse - logits(i, y)) / n;
    lv.output_grad(i, y) -= 1.0;
  }
  lv.output_grad /= n;
  return lv;
}

inline LossValue evaluate_loss(LossKind kind, const Matrix& output, const LossTargets& targets) {
  switch (kind) {
    case LossKind::mse:
      if (const auto* t = std::get_if<Matrix>(&targets)) return mse_loss(output, *t);
      break;
    case LossKind::uncertainty_sigmoid:
    case LossKind::uncertainty_bce:
      if (const auto* t = std::get_if<std::vector<std::uint8_t>>(&targets)) {
        return uncertainty_loss_from_scores(output, *t, kind == LossKind::uncertainty_bce);
      }
      break;
    case LossKind::cross_entropy:
      if (const auto* t = std::get_if<std::vector<int>>(&targets)) return cross_entropy_loss(output, *t);
      break;
  }
  throw InvalidInput("loss: target type does not match loss kind");
}

struct GradientResult {
  double loss = 0.0;
  NetGradients grads;
  Matrix input_grad;
};

/// Gradient of the mean batch loss with respect to every parameter of `net`.
inline GradientResult gradients(const DenseNet& net, const Matrix& batch, LossKind kind,
                                const LossTargets& targets) {
  ForwardCache cache = forward_cached(net, batch);
  LossValue lv = evaluate_loss(kind, cache.output, targets);
  if (!std::isfinite(lv.value)) throw NumericalFailure("non-finite loss value");
  BackwardResult br = backward(net, cache, lv.output_grad);
  return {lv.value, std::move(br.grads), std::move(br.input_grad)};
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment buffers for one flat parameter vector.
struct AdamState {
  AdamConfig config;
  std::uint64_t step_count = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;

  AdamState() = default;
  AdamState(AdamConfig cfg, std::size_t n_params)
      : config(cfg), first_moment(n_params, 0.0), second_moment(n_params, 0.0) {}
};

namespace detail {

inline void adam_update(std::span<double> params, std::span<const double> grads,
                        std::span<double> m, std::span<double> v, const AdamConfig& c,
                        double bias1, double bias2) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grads[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * grads[i] * grads[i];
    const double m_hat = m[i] / bias1;
    const double v_hat = v[i] / bias2;
    params[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

}  // namespace detail

/// One bias-corrected Adam update of a flat parameter vector.
inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
  if (params.size() != grads.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw InvalidInput("adam_step: parameter, gradient and moment sizes differ");
  }
  state.step_count += 1;
  const auto t = static_cast<double>(state.step_count);
  detail::adam_update(params, grads, state.first_moment, state.second_moment, state.config,
                      1.0 - std::pow(state.config.beta1, t), 1.0 - std::pow(state.config.beta2, t));
}

/// Adam over every parameter of a net. Moments are laid out as in
/// DenseNet::flatten().
inline void adam_step(DenseNet& net, const NetGradients& grads, AdamState& state) {
  if (grads.weight.size() != net.depth() || grads.bias.size() != net.depth() ||
      state.first_moment.size() != net.parameter_count() ||
      state.second_moment.size() != net.parameter_count()) {
    throw InvalidInput("adam_step: gradient/state shape does not match network");
  }
  for (std::size_t k = 0; k < net.depth(); ++k) {
    const auto& layer = net.layer(k);
    if (grads.weight[k].rows() != layer.weight.rows() || grads.weight[k].cols() != layer.weight.cols() ||
        grads.bias[k].size() != layer.bias.size()) {
      throw InvalidInput("adam_step: gradient shape mismatch in layer " + std::to_string(k));
    }
  }
  state.step_count += 1;
  const auto t = static_cast<double>(state.step_count);
  const double bias1 = 1.0 - std::pow(state.config.beta1, t);
  const double bias2 = 1.0 - std::pow(state.config.beta2, t);
  std::size_t offset = 0;
  auto update = [&](double* p, const double* g, std::size_t n) {
    std::span<double> m(state.first_moment.data() + offset, n);
    std::span<double> v(state.second_moment.data() + offset, n);
    detail::adam_update({p, n}, {g, n}, m, v, state.config, bias1, bias2);
    offset += n;
  };
  for (std::size_t k = 0; k < net.depth(); ++k) {
    auto& layer = net.layer(k);
    update(layer.weight.data(), grads.weight[k].data(), static_cast<std::size_t>(layer.weight.size()));
    update(layer.bias.data(), grads.bias[k].data(), static_cast<std::size_t>(layer.bias.size()));
  }
}

}  // namespace lsvos

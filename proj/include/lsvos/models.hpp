#pragma once

// Auto-encoder over class-augmented features, the uncertainty head, the
// surrogate classifier that stands in for a detector's classification head,
// and the three training losses.

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

#include "lsvos/checkpoint.hpp"
#include "lsvos/errors.hpp"
#include "lsvos/numerics.hpp"
#include "lsvos/rng.hpp"

namespace lsvos {

struct ModelDims {
  std::size_t feature_dim = 0;  // D
  std::size_t num_classes = 0;  // K
  std::vector<std::size_t> encoder_widths{256, 128, 128};  // last entry is the latent dim
  std::vector<std::size_t> decoder_hidden{128, 256};       // output layer of width D is appended
  std::vector<std::size_t> head_hidden{256, 256};          // output layer of width 1 is appended
  std::size_t classifier_hidden = 128;
};

/// phi(x) = d(e(x)): (D + K) -> latent -> D.
class AutoEncoder {
 public:
  AutoEncoder() = default;
  AutoEncoder(DenseNet encoder, DenseNet decoder, std::size_t feature_dim, std::size_t num_classes)
      : encoder_(std::move(encoder)), decoder_(std::move(decoder)), feature_dim_(feature_dim),
        num_classes_(num_classes) {
    if (encoder_.input_dim() != feature_dim + num_classes) {
      throw InvalidInput("AutoEncoder: encoder input must be D + K");
    }
    if (encoder_.output_dim() != decoder_.input_dim()) {
      throw InvalidInput("AutoEncoder: encoder output and decoder input dims differ");
    }
    if (decoder_.output_dim() != feature_dim) throw InvalidInput("AutoEncoder: decoder output must be D");
  }

  static AutoEncoder create(const ModelDims& dims, Rng& rng) {
    if (dims.encoder_widths.empty()) throw InvalidInput("AutoEncoder: encoder needs at least one layer");
    std::vector<std::size_t> enc{dims.feature_dim + dims.num_classes};
    enc.insert(enc.end(), dims.encoder_widths.begin(), dims.encoder_widths.end());
    std::vector<std::size_t> dec{dims.encoder_widths.back()};
    dec.insert(dec.end(), dims.decoder_hidden.begin(), dims.decoder_hidden.end());
    dec.push_back(dims.feature_dim);
    DenseNet e = DenseNet::glorot(enc, DenseNet::mlp_activations(enc.size() - 1), rng);
    DenseNet d = DenseNet::glorot(dec, DenseNet::mlp_activations(dec.size() - 1), rng);
    return AutoEncoder(std::move(e), std::move(d), dims.feature_dim, dims.num_classes);
  }

  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t latent_dim() const { return encoder_.output_dim(); }

  DenseNet& encoder() { return encoder_; }
  const DenseNet& encoder() const { return encoder_; }
  DenseNet& decoder() { return decoder_; }
  const DenseNet& decoder() const { return decoder_; }

  /// Number of optimizer updates applied; zero means untrained.
  std::uint64_t trained_steps() const { return trained_steps_; }
  void mark_trained_step() { ++trained_steps_; }
  void set_trained_steps(std::uint64_t n) { trained_steps_ = n; }

  Matrix encode(const Matrix& augmented) const { return forward(encoder_, augmented); }
  Matrix decode(const Matrix& latent) const { return forward(decoder_, latent); }
  Matrix reconstruct(const Matrix& augmented) const { return decode(encode(augmented)); }

  friend bool operator==(const AutoEncoder&, const AutoEncoder&) = default;

 private:
  DenseNet encoder_;
  DenseNet decoder_;
  std::size_t feature_dim_ = 0;
  std::size_t num_classes_ = 0;
  std::uint64_t trained_steps_ = 0;
};

struct UncertaintyHead {
  DenseNet net;

  static UncertaintyHead create(const ModelDims& dims, Rng& rng) {
    std::vector<std::size_t> d{dims.feature_dim};
    d.insert(d.end(), dims.head_hidden.begin(), dims.head_hidden.end());
    d.push_back(1);
    return {DenseNet::glorot(d, DenseNet::mlp_activations(d.size() - 1), rng)};
  }

  /// One raw score per row; higher means more outlier-like.
  Vector score(const Matrix& u) const { return forward(net, u).col(0); }

  friend bool operator==(const UncertaintyHead&, const UncertaintyHead&) = default;
};

struct SurrogateClassifier {
  DenseNet net;

  static SurrogateClassifier create(const ModelDims& dims, Rng& rng) {
    const std::vector<std::size_t> d{dims.feature_dim, dims.classifier_hidden, dims.num_classes};
    return {DenseNet::glorot(d, DenseNet::mlp_activations(2), rng)};
  }

  Matrix logits(const Matrix& u) const { return forward(net, u); }

  friend bool operator==(const SurrogateClassifier&, const SurrogateClassifier&) = default;
};

// ---------------------------------------------------------------------------
// Losses

struct AeGradients {
  double loss = 0.0;
  NetGradients encoder;
  NetGradients decoder;
};

namespace detail {

inline void check_ae_input(const AutoEncoder& ae, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != ae.feature_dim() + ae.num_classes()) {
    throw InvalidInput("ae_loss: input has " + std::to_string(x.cols()) + " columns, expected D + K = " +
                       std::to_string(ae.feature_dim() + ae.num_classes()));
  }
  if (x.rows() == 0) throw InvalidInput("ae_loss: empty batch");
}

}  // namespace detail

/// Mean squared reconstruction error of the feature part (first D columns)
/// of class-augmented rows.
inline double ae_loss(const AutoEncoder& ae, const Matrix& augmented) {
  detail::check_ae_input(ae, augmented);
  const auto d = static_cast<Eigen::Index>(ae.feature_dim());
  return (ae.reconstruct(augmented) - augmented.leftCols(d)).squaredNorm() /
         static_cast<double>(augmented.rows() * d);
}

inline AeGradients ae_gradients(const AutoEncoder& ae, const Matrix& augmented) {
  detail::check_ae_input(ae, augmented);
  const auto d = static_cast<Eigen::Index>(ae.feature_dim());
  ForwardCache enc = forward_cached(ae.encoder(), augmented);
  ForwardCache dec = forward_cached(ae.decoder(), enc.output);
  const Matrix target = augmented.leftCols(d);
  LossValue lv = mse_loss(dec.output, target);
  if (!std::isfinite(lv.value)) throw NumericalFailure("auto-encoder loss is not finite");
  BackwardResult dec_back = backward(ae.decoder(), dec, lv.output_grad);
  BackwardResult enc_back = backward(ae.encoder(), enc, dec_back.input_grad);
  return {lv.value, std::move(enc_back.grads), std::move(dec_back.grads)};
}

namespace detail {

inline std::pair<Matrix, std::vector<std::uint8_t>> stack_id_ood(const Matrix& u_id, const Matrix& u_ood) {
  if (u_id.rows() + u_ood.rows() == 0) throw InvalidInput("uncertainty_loss: both ID and OOD sets are empty");
  if (u_id.rows() > 0 && u_ood.rows() > 0 && u_id.cols() != u_ood.cols()) {
    throw InvalidInput("uncertainty_loss: ID and OOD feature widths differ");
  }
  const auto cols = u_id.rows() > 0 ? u_id.cols() : u_ood.cols();
  Matrix all(u_id.rows() + u_ood.rows(), cols);
  if (u_ood.rows() > 0) all.topRows(u_ood.rows()) = u_ood;
  if (u_id.rows() > 0) all.bottomRows(u_id.rows()) = u_id;
  std::vector<std::uint8_t> is_ood(static_cast<std::size_t>(all.rows()), 0);
  std::fill_n(is_ood.begin(), u_ood.rows(), std::uint8_t{1});
  return {std::move(all), std::move(is_ood)};
}

}  // namespace detail

/// mean_ood[-sigmoid(f)] + mean_id[-(1 - sigmoid(f))]; with `log_form` the
/// binary cross-entropy variant. An empty side contributes nothing.
inline double uncertainty_loss(const UncertaintyHead& head, const Matrix& u_id, const Matrix& u_ood,
                               bool log_form = false) {
  auto [all, is_ood] = detail::stack_id_ood(u_id, u_ood);
  return uncertainty_loss_from_scores(forward(head.net, all), is_ood, log_form).value;
}

inline GradientResult uncertainty_gradients(const UncertaintyHead& head, const Matrix& u_id,
                                            const Matrix& u_ood, bool log_form = false) {
  auto [all, is_ood] = detail::stack_id_ood(u_id, u_ood);
  return gradients(head.net, all, log_form ? LossKind::uncertainty_bce : LossKind::uncertainty_sigmoid,
                   is_ood);
}

/// Cross-entropy of the surrogate classifier; stands in for the detector loss.
inline double detection_surrogate_loss(const SurrogateClassifier& clf, const Matrix& u,
                                       const std::vector<int>& labels) {
  return cross_entropy_loss(clf.logits(u), labels).value;
}

inline GradientResult detection_surrogate_gradients(const SurrogateClassifier& clf, const Matrix& u,
                                                    const std::vector<int>& labels) {
  return gradients(clf.net, u, LossKind::cross_entropy, labels);
}

/// L_det + L_AE + lambda * L_uncertainty.
inline double total_loss(double det_loss, double ae_loss_value, double unc_loss, double lambda) {
  if (!(lambda >= 0.0)) throw InvalidInput("total_loss: lambda must be non-negative");
  return det_loss + ae_loss_value + lambda * unc_loss;
}

/// Maximum softmax probability per row.
inline Vector default_score(const SurrogateClassifier& clf, const Matrix& u) {
  return softmax(clf.logits(u)).rowwise().maxCoeff();
}

// ---------------------------------------------------------------------------
// Bundle checkpoint:
//   magic "VOSB" | version u32 | D u32 | K u32 | ae_trained_steps u64
//   encoder, decoder, uncertainty head, classifier as consecutive VOSN blobs

struct ModelBundle {
  AutoEncoder ae;
  UncertaintyHead head;
  SurrogateClassifier classifier;

  static ModelBundle create(const ModelDims& dims, Rng& rng) {
    ModelBundle b;
    b.ae = AutoEncoder::create(dims, rng);
    b.head = UncertaintyHead::create(dims, rng);
    b.classifier = SurrogateClassifier::create(dims, rng);
    return b;
  }

  friend bool operator==(const ModelBundle&, const ModelBundle&) = default;
};

inline constexpr std::uint32_t kBundleVersion = 1;

inline void write_bundle(std::ostream& os, const ModelBundle& b) {
  io::write_magic(os, "VOSB");
  io::write_le<std::uint32_t>(os, kBundleVersion);
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(b.ae.feature_dim()));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(b.ae.num_classes()));
  io::write_le<std::uint64_t>(os, b.ae.trained_steps());
  write_net(os, b.ae.encoder());
  write_net(os, b.ae.decoder());
  write_net(os, b.head.net);
  write_net(os, b.classifier.net);
}

inline ModelBundle read_bundle(std::istream& is) {
  io::expect_magic(is, "VOSB");
  if (const auto v = io::read_le<std::uint32_t>(is); v != kBundleVersion) {
    throw FormatError("unsupported bundle version " + std::to_string(v));
  }
  const auto d = io::read_le<std::uint32_t>(is);
  const auto k = io::read_le<std::uint32_t>(is);
  const auto steps = io::read_le<std::uint64_t>(is);
  ModelBundle b;
  DenseNet enc = read_net(is);
  DenseNet dec = read_net(is);
  try {
    b.ae = AutoEncoder(std::move(enc), std::move(dec), d, k);
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("bundle: ") + e.what());
  }
  b.ae.set_trained_steps(steps);
  b.head.net = read_net(is);
  b.classifier.net = read_net(is);
  if (b.head.net.input_dim() != d || b.head.net.output_dim() != 1 || b.classifier.net.input_dim() != d ||
      b.classifier.net.output_dim() != k) {
    throw FormatError("bundle: head/classifier dims inconsistent with D and K");
  }
  return b;
}

inline void save_bundle(const std::string& path, const ModelBundle& b) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_bundle(os, b);
}

inline ModelBundle load_bundle(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  return read_bundle(is);
}

}  // namespace lsvos

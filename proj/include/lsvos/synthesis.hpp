#pragma once

// Virtual-outlier generators. Every generator returns D-dimensional rows
// (never the one-hot suffix).

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "lsvos/errors.hpp"
#include "lsvos/feature_store.hpp"
#include "lsvos/gaussian.hpp"
#include "lsvos/models.hpp"
#include "lsvos/numerics.hpp"
#include "lsvos/rng.hpp"

namespace lsvos {

enum class SynthMethod { lsvos, vos, linear_mix, random_noise, noisy_id };

inline std::string to_string(SynthMethod m) {
  switch (m) {
    case SynthMethod::lsvos: return "lsvos";
    case SynthMethod::vos: return "vos";
    case SynthMethod::linear_mix: return "linear_mix";
    case SynthMethod::random_noise: return "random_noise";
    case SynthMethod::noisy_id: return "noisy_id";
  }
  return "?";
}

inline SynthMethod parse_synth_method(const std::string& s) {
  for (auto m : {SynthMethod::lsvos, SynthMethod::vos, SynthMethod::linear_mix, SynthMethod::random_noise,
                 SynthMethod::noisy_id}) {
    if (to_string(m) == s) return m;
  }
  throw InvalidInput("unknown synthesis method '" + s + "'");
}

/// Latent noise o = beta * (alpha + U(0, 1)).
struct NoiseSpec {
  double alpha = 0.25;
  double beta = 1.0;

  void validate() const {
    if (!std::isfinite(alpha) || !std::isfinite(beta) || alpha < 0.0 || beta < 0.0) {
      throw InvalidInput("NoiseSpec: alpha and beta must be finite and non-negative");
    }
  }
};

struct SynthBatch {
  Matrix vectors;
  std::vector<int> classes;  // per row when the method is class-aware, else empty
  SynthMethod method = SynthMethod::lsvos;
  std::string provenance;
  std::uint64_t seed = 0;
  std::optional<Matrix> latent_noise;  // LS-VOS only: the o added to each latent row
};

/// Decode noisy latents: v = d(e([u_id, one_hot]) + o).
inline SynthBatch lsvos_synthesize(const AutoEncoder& ae, const Matrix& u_id, const std::vector<int>& classes,
                                   const NoiseSpec& spec, Rng& rng) {
  spec.validate();
  if (ae.trained_steps() == 0) throw NotReady("lsvos_synthesize: auto-encoder has not been trained");
  if (static_cast<std::size_t>(u_id.cols()) != ae.feature_dim()) {
    throw InvalidInput("lsvos_synthesize: feature width does not match auto-encoder");
  }
  Matrix z = ae.encode(augment_one_hot(u_id, classes, ae.num_classes()));
  Matrix noise(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = spec.beta * (spec.alpha + rng.uniform());
  z += noise;
  SynthBatch out;
  out.vectors = ae.decode(z);
  out.classes = classes;
  out.method = SynthMethod::lsvos;
  out.provenance = "alpha=" + std::to_string(spec.alpha) + ";beta=" + std::to_string(spec.beta);
  out.seed = rng.seed();
  out.latent_noise = std::move(noise);
  return out;
}

struct VosParams {
  std::size_t n_per_class = 500;
  std::size_t n_candidates = 10000;

  /// Fraction of candidates kept per class.
  double tail_fraction() const { return static_cast<double>(n_per_class) / static_cast<double>(n_candidates); }
};

/// Fits class means and a shared covariance to the snapshot, draws
/// n_candidates per class and keeps the n_per_class least likely ones.
inline SynthBatch vos_synthesize(const Matrix& features, const std::vector<int>& classes, std::size_t num_classes,
                                 const VosParams& params, Rng& rng) {
  if (params.n_per_class == 0 || params.n_candidates < params.n_per_class) {
    throw InvalidInput("vos_synthesize: need 0 < n_per_class <= n_candidates");
  }
  const auto gauss = SharedCovarianceGaussian::fit(features, classes, num_classes);
  SynthBatch out;
  out.method = SynthMethod::vos;
  out.seed = rng.seed();
  out.provenance = "n_candidates=" + std::to_string(params.n_candidates);
  out.vectors.resize(static_cast<Eigen::Index>(params.n_per_class * num_classes), features.cols());
  Eigen::Index row = 0;
  for (std::size_t k = 0; k < num_classes; ++k) {
    const Matrix cand = gauss.sample(k, params.n_candidates, rng);
    const Vector ll = gauss.log_likelihood(cand, k);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(cand.rows()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return ll(a) < ll(b); });
    for (std::size_t i = 0; i < params.n_per_class; ++i) {
      out.vectors.row(row++) = cand.row(order[i]);
      out.classes.push_back(static_cast<int>(k));
    }
  }
  return out;
}

/// Row i is w * u_id[i] + (1 - w) * u_fp[j] with j uniform.
inline SynthBatch linear_mix(const Matrix& u_id, const Matrix& u_fp, double weight, Rng& rng) {
  if (u_fp.rows() == 0) throw NotReady("linear_mix: no FP features to mix with");
  if (u_id.rows() == 0) throw InvalidInput("linear_mix: no ID features");
  if (u_id.cols() != u_fp.cols()) throw InvalidInput("linear_mix: ID and FP widths differ");
  if (!(weight >= 0.0 && weight <= 1.0)) throw InvalidInput("linear_mix: weight outside [0, 1]");
  SynthBatch out;
  out.method = SynthMethod::linear_mix;
  out.seed = rng.seed();
  out.provenance = "weight=" + std::to_string(weight);
  out.vectors.resize(u_id.rows(), u_id.cols());
  for (Eigen::Index i = 0; i < u_id.rows(); ++i) {
    const auto j = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(u_fp.rows())));
    out.vectors.row(i) = weight * u_id.row(i) + (1.0 - weight) * u_fp.row(j);
  }
  return out;
}

/// m x d standard normal draws.
inline SynthBatch random_noise(std::size_t m, std::size_t d, Rng& rng) {
  if (m == 0 || d == 0) throw InvalidInput("random_noise: m and d must be positive");
  SynthBatch out;
  out.method = SynthMethod::random_noise;
  out.seed = rng.seed();
  out.provenance = "N(0,1)";
  out.vectors.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < out.vectors.size(); ++i) out.vectors.data()[i] = rng.normal();
  return out;
}

/// u_id + U(0, 1) element-wise.
inline SynthBatch noisy_id(const Matrix& u_id, Rng& rng) {
  if (u_id.rows() == 0) throw InvalidInput("noisy_id: no ID features");
  SynthBatch out;
  out.method = SynthMethod::noisy_id;
  out.seed = rng.seed();
  out.provenance = "U(0,1)";
  out.vectors = u_id;
  for (Eigen::Index i = 0; i < out.vectors.size(); ++i) out.vectors.data()[i] += rng.uniform();
  return out;
}

// ---------------------------------------------------------------------------
// Single entry point used by the training loop.

struct SynthParams {
  NoiseSpec noise;
  double mix_weight = 0.5;
  std::size_t vos_candidates = 10000;
};

/// Whatever a generator may need; unused members may be null.
struct SynthInputs {
  const AutoEncoder* ae = nullptr;
  const Matrix* u_id = nullptr;
  const std::vector<int>* id_classes = nullptr;
  const Matrix* u_fp = nullptr;
  const FeatureQueue* queue = nullptr;
};

/// Produces about as many rows as u_id has (VOS rounds up to a multiple of K).
inline SynthBatch synthesize(SynthMethod method, const SynthInputs& in, const SynthParams& params, Rng& rng) {
  if (in.u_id == nullptr || in.u_id->rows() == 0) throw InvalidInput("synthesize: ID batch required");
  const Matrix& u_id = *in.u_id;
  switch (method) {
    case SynthMethod::lsvos:
      if (in.ae == nullptr || in.id_classes == nullptr) throw InvalidInput("synthesize(lsvos): needs AE and classes");
      return lsvos_synthesize(*in.ae, u_id, *in.id_classes, params.noise, rng);
    case SynthMethod::vos: {
      if (in.queue == nullptr || !in.queue->ready()) throw NotReady("synthesize(vos): feature queue not ready");
      auto [feats, cls] = in.queue->snapshot();
      const std::size_t k = in.queue->num_classes();
      VosParams vp;
      vp.n_per_class = (static_cast<std::size_t>(u_id.rows()) + k - 1) / k;
      vp.n_candidates = std::max(params.vos_candidates, vp.n_per_class);
      return vos_synthesize(feats, cls, k, vp, rng);
    }
    case SynthMethod::linear_mix:
      if (in.u_fp == nullptr) throw NotReady("synthesize(linear_mix): FP batch required");
      return linear_mix(u_id, *in.u_fp, params.mix_weight, rng);
    case SynthMethod::random_noise:
      return random_noise(static_cast<std::size_t>(u_id.rows()), static_cast<std::size_t>(u_id.cols()), rng);
    case SynthMethod::noisy_id:
      return noisy_id(u_id, rng);
  }
  throw InvalidInput("synthesize: unknown method");
}

}  // namespace lsvos

#pragma once

// Synthetic stand-ins for detector output: class-conditional Gaussian ID
// features, FP features from a near/far mixture whose distance to the ID
// clusters is controlled by fp_overlap, and random box scenes.

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "lsvos/errors.hpp"
#include "lsvos/feature_store.hpp"
#include "lsvos/geometry.hpp"
#include "lsvos/rng.hpp"

namespace lsvos {

struct GeneratorSpec {
  std::size_t dim = 64;
  std::size_t num_classes = 3;
  std::vector<std::string> class_names{"vehicle", "pedestrian", "cyclist"};
  /// Class means; drawn from the seed (norm = class_separation) when empty.
  std::vector<std::vector<double>> class_means;
  /// Isotropic standard deviation per class; all 1 when empty.
  std::vector<double> class_scales;
  double class_separation = 3.0;
  /// 0: FP clusters sit `fp_displacement` std-devs from the ID means;
  /// 1: FP features are drawn from the ID clusters themselves.
  double fp_overlap = 0.5;
  double fp_displacement = 10.0;
  /// Offset of the near FP component relative to the far one.
  double fp_near_ratio = 0.75;
  std::size_t n_train_id = 6000;
  std::size_t n_train_fp = 2000;
  std::size_t n_val_id = 2000;
  std::size_t n_val_fp = 700;
  std::uint64_t seed = 0;

  void validate() const {
    if (dim == 0 || num_classes == 0) throw InvalidInput("GeneratorSpec: D and K must be positive");
    if (!(fp_overlap >= 0.0 && fp_overlap <= 1.0)) throw InvalidInput("GeneratorSpec: fp_overlap must be in [0, 1]");
    if (!(fp_displacement >= 0.0) || !std::isfinite(fp_displacement)) {
      throw InvalidInput("GeneratorSpec: fp_displacement must be finite and non-negative");
    }
    if (!(fp_near_ratio >= 0.0 && fp_near_ratio <= 1.0)) throw InvalidInput("GeneratorSpec: fp_near_ratio must be in [0, 1]");
    if (n_train_id == 0 || n_train_fp == 0 || n_val_id == 0 || n_val_fp == 0) {
      throw InvalidInput("GeneratorSpec: counts must be positive");
    }
    if (!class_names.empty() && class_names.size() != num_classes) {
      throw InvalidInput("GeneratorSpec: class_names must have K entries");
    }
    if (!class_means.empty()) {
      if (class_means.size() != num_classes) throw InvalidInput("GeneratorSpec: need K class means");
      for (const auto& m : class_means) {
        if (m.size() != dim) throw InvalidInput("GeneratorSpec: class mean has wrong dimension");
      }
    }
    if (!class_scales.empty()) {
      if (class_scales.size() != num_classes) throw InvalidInput("GeneratorSpec: need K class scales");
      for (double s : class_scales) {
        if (!(s > 0.0)) throw InvalidInput("GeneratorSpec: class scales must be positive");
      }
    }
  }
};

/// D=64, K=3, 6000/2000 train and 2000/700 val ID/FP features.
inline GeneratorSpec desk_preset(std::uint64_t seed) {
  GeneratorSpec s;
  s.seed = seed;
  return s;
}

struct GeneratedFeatures {
  FeatureDataset train;
  FeatureDataset val;
};

namespace detail {

inline std::vector<double> random_unit(std::size_t dim, Rng& rng) {
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

/// Values are rounded to float so files written in the 32-bit feature
/// format reload bit-identically.
inline double f32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace detail

inline GeneratedFeatures generate_features(const GeneratorSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t d = spec.dim;
  const std::size_t k_count = spec.num_classes;

  std::vector<std::vector<double>> means = spec.class_means;
  if (means.empty()) {
    for (std::size_t k = 0; k < k_count; ++k) {
      auto u = detail::random_unit(d, rng);
      for (auto& x : u) x *= spec.class_separation;
      means.push_back(std::move(u));
    }
  }
  std::vector<double> scales = spec.class_scales;
  if (scales.empty()) scales.assign(k_count, 1.0);

  // One displacement direction per (class, component): 0 = near, 1 = far.
  std::vector<std::array<std::vector<double>, 2>> directions(k_count);
  for (auto& pair : directions) {
    pair[0] = detail::random_unit(d, rng);
    pair[1] = detail::random_unit(d, rng);
  }
  const double shift = (1.0 - spec.fp_overlap) * spec.fp_displacement;
  const std::array<double, 2> component_shift{shift * spec.fp_near_ratio, shift};

  auto draw = [&](FeatureLabel label, FeatureDataset& ds, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      FeatureRecord r;
      r.class_id = static_cast<int>(rng.index(k_count));
      r.label = label;
      r.source_id = ds.split + ":" + std::to_string(ds.records.size());
      const auto k = static_cast<std::size_t>(r.class_id);
      r.vector.resize(d);
      double offset = 0.0;
      const std::vector<double>* dir = nullptr;
      if (label == FeatureLabel::fp) {
        const std::size_t comp = rng.index(2);
        offset = component_shift[comp] * scales[k];
        dir = &directions[k][comp];
      }
      for (std::size_t j = 0; j < d; ++j) {
        double x = means[k][j] + scales[k] * rng.normal();
        if (dir != nullptr) x += offset * (*dir)[j];
        r.vector[j] = detail::f32(x);
      }
      ds.records.push_back(std::move(r));
    }
  };

  GeneratedFeatures out;
  for (FeatureDataset* ds : {&out.train, &out.val}) {
    ds->dim = d;
    ds->num_classes = k_count;
    ds->class_names = spec.class_names.empty() ? std::vector<std::string>{} : spec.class_names;
    if (ds->class_names.empty()) {
      for (std::size_t k = 0; k < k_count; ++k) ds->class_names.push_back("class" + std::to_string(k));
    }
  }
  out.train.split = "train";
  out.val.split = "val";
  draw(FeatureLabel::id, out.train, spec.n_train_id);
  draw(FeatureLabel::fp, out.train, spec.n_train_fp);
  draw(FeatureLabel::id, out.val, spec.n_val_id);
  draw(FeatureLabel::fp, out.val, spec.n_val_fp);
  return out;
}

// ---------------------------------------------------------------------------
// Scenes

struct GeneratedScene {
  Scene scene;
  /// Label each prediction was built to have: ID for jittered copies of a
  /// ground truth, FP for spurious boxes.
  std::vector<FeatureLabel> intended;
};

/// Nominal (length, width, height) per class: vehicle, pedestrian, cyclist.
inline std::array<double, 3> nominal_box_size(int class_id) {
  switch (class_id % 3) {
    case 0: return {4.2, 1.8, 1.6};
    case 1: return {0.8, 0.7, 1.75};
    default: return {1.8, 0.7, 1.7};
  }
}

/// Ground truths sit in separate 15 m grid cells. Each gets a prediction
/// whose centre moves by N(0, jitter * size) per axis and whose yaw moves by
/// N(0, jitter) radians. Spurious predictions are placed at least 20 m from
/// every ground-truth centre.
inline std::vector<GeneratedScene> generate_scenes(std::size_t n_scenes, std::size_t boxes_per_scene, double jitter,
                                                   std::uint64_t seed) {
  if (n_scenes == 0 || boxes_per_scene == 0) throw InvalidInput("generate_scenes: counts must be positive");
  if (!(jitter >= 0.0) || !std::isfinite(jitter)) throw InvalidInput("generate_scenes: jitter must be >= 0");
  constexpr double kCell = 15.0;
  constexpr double kMinSpuriousDistance = 20.0;
  Rng rng(seed);
  std::vector<GeneratedScene> out;
  const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(boxes_per_scene))));
  for (std::size_t s = 0; s < n_scenes; ++s) {
    GeneratedScene gs;
    for (std::size_t b = 0; b < boxes_per_scene; ++b) {
      const int cls = static_cast<int>(rng.index(3));
      const auto nominal = nominal_box_size(cls);
      const double cx = kCell * static_cast<double>(b % side) + rng.uniform(-2.0, 2.0);
      const double cy = kCell * static_cast<double>(b / side) + rng.uniform(-2.0, 2.0);
      const double l = nominal[0] * rng.uniform(0.9, 1.1);
      const double w = nominal[1] * rng.uniform(0.9, 1.1);
      const double h = nominal[2] * rng.uniform(0.9, 1.1);
      const double yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
      Box3D gt(cx, cy, 0.5 * h, l, w, h, yaw);
      gs.scene.ground_truths.push_back({gt, cls});
      Box3D pred(cx + jitter * l * rng.normal(), cy + jitter * w * rng.normal(), 0.5 * h + jitter * h * rng.normal(), l,
                 w, h, yaw + jitter * rng.normal());
      gs.scene.predictions.push_back({pred, cls, rng.uniform(0.5, 1.0)});
      gs.intended.push_back(FeatureLabel::id);
    }
    const std::size_t n_spurious = std::max<std::size_t>(1, boxes_per_scene / 4);
    const double extent = kCell * static_cast<double>(side);
    for (std::size_t i = 0; i < n_spurious; ++i) {
      const int cls = static_cast<int>(rng.index(3));
      const auto nominal = nominal_box_size(cls);
      double x = 0.0;
      double y = 0.0;
      for (;;) {
        x = rng.uniform(-extent - 40.0, 2.0 * extent + 40.0);
        y = rng.uniform(-extent - 40.0, 2.0 * extent + 40.0);
        bool far = true;
        for (const auto& g : gs.scene.ground_truths) {
          if (std::hypot(x - g.box.x(), y - g.box.y()) < kMinSpuriousDistance) {
            far = false;
            break;
          }
        }
        if (far) break;
      }
      Box3D box(x, y, 0.5 * nominal[2], nominal[0], nominal[1], nominal[2], rng.uniform(-std::numbers::pi, std::numbers::pi));
      gs.scene.predictions.push_back({box, cls, rng.uniform(0.05, 0.6)});
      gs.intended.push_back(FeatureLabel::fp);
    }
    out.push_back(std::move(gs));
  }
  return out;
}

}  // namespace lsvos

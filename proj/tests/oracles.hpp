#pragma once

// Independent reference computations used only by tests. None of these call
// into the code paths they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <vector>

#include "lsvos/geometry.hpp"
#include "lsvos/numerics.hpp"
#include "lsvos/rng.hpp"

namespace oracle {

/// Plain nested-loop forward pass.
inline std::vector<double> naive_forward(const lsvos::DenseNet& net, std::vector<double> x) {
  for (const auto& layer : net.layers()) {
    std::vector<double> y(layer.out_dim(), 0.0);
    for (std::size_t o = 0; o < layer.out_dim(); ++o) {
      double acc = layer.bias(static_cast<Eigen::Index>(o));
      for (std::size_t i = 0; i < layer.in_dim(); ++i) {
        acc += layer.weight(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(i)) * x[i];
      }
      y[o] = layer.activation == lsvos::Activation::relu ? std::max(0.0, acc) : acc;
    }
    x = std::move(y);
  }
  return x;
}

inline double naive_mse(const std::vector<std::vector<double>>& pred, const std::vector<std::vector<double>>& target) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t j = 0; j < pred[i].size(); ++j, ++n) s += (pred[i][j] - target[i][j]) * (pred[i][j] - target[i][j]);
  }
  return s / static_cast<double>(n);
}

/// Pairwise count: P(ood > id) + 0.5 P(ood == id).
inline double auroc_pairs(const std::vector<double>& id, const std::vector<double>& ood) {
  double wins = 0.0;
  for (double o : ood) {
    for (double i : id) wins += o > i ? 1.0 : (o == i ? 0.5 : 0.0);
  }
  return wins / static_cast<double>(id.size() * ood.size());
}

/// Enumerate every distinct acceptance threshold t ("positive iff key >= t"),
/// sort by recall and sum step areas.
inline double aupr_enumerate(const std::vector<double>& keys, const std::vector<bool>& positive) {
  std::set<double> thresholds(keys.begin(), keys.end());
  double n_pos = 0;
  for (bool p : positive) n_pos += p;
  std::vector<std::pair<double, double>> pts;  // (recall, precision)
  for (double t : thresholds) {
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      if (keys[i] >= t) (positive[i] ? tp : fp) += 1;
    }
    pts.emplace_back(tp / n_pos, tp / (tp + fp));
  }
  std::sort(pts.begin(), pts.end(), [](auto a, auto b) { return a.first < b.first || (a.first == b.first && a.second > b.second); });
  double area = 0.0, prev = 0.0;
  for (auto [r, p] : pts) {
    area += (r - prev) * p;
    prev = r;
  }
  return area;
}

/// Try every observed ID score as tau; take the smallest admitting `tpr`.
inline double fpr_enumerate(const std::vector<double>& id, const std::vector<double>& ood, double tpr) {
  double best_tau = INFINITY;
  for (double t : id) {
    double acc = 0;
    for (double s : id) acc += s <= t;
    if (acc / static_cast<double>(id.size()) >= tpr) best_tau = std::min(best_tau, t);
  }
  double fp = 0;
  for (double s : ood) fp += s <= best_tau;
  return fp / static_cast<double>(ood.size());
}

/// Monte-Carlo IoU over the axis-aligned bounding volume of both boxes.
inline double iou_monte_carlo(const lsvos::Box3D& a, const lsvos::Box3D& b, std::size_t n, std::uint64_t seed) {
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  for (const auto* box : {&a, &b}) {
    for (const auto& c : box->corners()) {
      xlo = std::min(xlo, c.x);
      xhi = std::max(xhi, c.x);
      ylo = std::min(ylo, c.y);
      yhi = std::max(yhi, c.y);
    }
  }
  const double zlo = std::min(a.z_min(), b.z_min());
  const double zhi = std::max(a.z_max(), b.z_max());
  lsvos::Rng rng(seed);
  std::size_t in_a = 0, in_b = 0, in_both = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(xlo, xhi), y = rng.uniform(ylo, yhi), z = rng.uniform(zlo, zhi);
    const bool ia = a.contains(x, y, z), ib = b.contains(x, y, z);
    in_a += ia;
    in_b += ib;
    in_both += ia && ib;
  }
  const double uni = static_cast<double>(in_a + in_b - in_both);
  return uni == 0 ? 0.0 : static_cast<double>(in_both) / uni;
}

/// Central finite differences of `loss` with respect to each flat parameter
/// of `net`, perturbing in place. Sets `kink[i]` when the sign pattern of
/// ReLU pre-activations differs between the +h and -h evaluations (the loss
/// is not differentiable there).
struct FdResult {
  std::vector<double> grad;
  std::vector<bool> kink;
};

inline FdResult finite_differences(lsvos::DenseNet& net, const std::function<double()>& loss,
                                   const std::function<std::vector<bool>()>& relu_pattern, double h = 1e-4) {
  FdResult r;
  for (auto& layer : net.layers()) {
    for (double* block : {layer.weight.data(), layer.bias.data()}) {
      const Eigen::Index n = block == layer.weight.data() ? layer.weight.size() : layer.bias.size();
      for (Eigen::Index i = 0; i < n; ++i) {
        const double saved = block[i];
        block[i] = saved + h;
        const double up = loss();
        const auto pat_up = relu_pattern();
        block[i] = saved - h;
        const double down = loss();
        const auto pat_down = relu_pattern();
        block[i] = saved;
        r.grad.push_back((up - down) / (2.0 * h));
        r.kink.push_back(pat_up != pat_down);
      }
    }
  }
  return r;
}

/// Sign pattern of every hidden ReLU pre-activation for a batch.
inline std::vector<bool> relu_signs(const lsvos::DenseNet& net, const lsvos::Matrix& batch) {
  std::vector<bool> out;
  lsvos::Matrix x = batch;
  for (const auto& layer : net.layers()) {
    lsvos::Matrix z = x * layer.weight.transpose();
    z.rowwise() += layer.bias;
    if (layer.activation == lsvos::Activation::relu) {
      for (Eigen::Index i = 0; i < z.size(); ++i) out.push_back(z.data()[i] > 0);
      z = z.cwiseMax(0.0);
    }
    x = z;
  }
  return out;
}

/// |a - n| / max(|a|, |n|, floor); `floor` keeps near-zero gradients from
/// dominating through rounding noise.
inline double relative_error(double analytic, double numeric, double floor = 1e-7) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

}  // namespace oracle

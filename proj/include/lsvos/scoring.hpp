#pragma once

// Per-item outlier scores (higher = more anomalous everywhere in this
// library), threshold calibration and the hard ID/OOD decision.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "lsvos/errors.hpp"
#include "lsvos/gaussian.hpp"
#include "lsvos/models.hpp"
#include "lsvos/numerics.hpp"

namespace lsvos {

enum class Truth : std::uint8_t { id = 0, ood = 1 };

inline std::string to_string(Truth t) { return t == Truth::id ? "ID" : "OOD"; }

struct ScoreSet {
  std::string method;
  std::vector<double> scores;
  std::vector<Truth> truth;
  std::string orientation = "higher = more anomalous";

  void validate() const {
    if (scores.size() != truth.size()) throw InvalidInput("ScoreSet: scores and truth differ in length");
    for (double s : scores) {
      if (!std::isfinite(s)) throw InvalidInput("ScoreSet '" + method + "': non-finite score");
    }
  }

  std::size_t count(Truth t) const { return static_cast<std::size_t>(std::count(truth.begin(), truth.end(), t)); }

  std::vector<double> scores_of(Truth t) const {
    std::vector<double> out;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (truth[i] == t) out.push_back(scores[i]);
    }
    return out;
  }
};

/// Default-score baseline in the shared orientation: the max softmax
/// probability, negated.
inline std::vector<double> default_outlier_scores(const SurrogateClassifier& clf, const Matrix& u) {
  const Vector conf = default_score(clf, u);
  std::vector<double> out(static_cast<std::size_t>(conf.size()));
  for (Eigen::Index i = 0; i < conf.size(); ++i) out[static_cast<std::size_t>(i)] = -conf(i);
  return out;
}

inline std::vector<double> uncertainty_scores(const UncertaintyHead& head, const Matrix& u) {
  const Vector s = head.score(u);
  return {s.data(), s.data() + s.size()};
}

/// Minimum over classes of the squared Mahalanobis distance to the class
/// mean under the shared covariance of the training ID features.
class MahalanobisScorer {
 public:
  MahalanobisScorer(const Matrix& train_features, const std::vector<int>& classes, std::size_t num_classes)
      : gauss_(SharedCovarianceGaussian::fit(train_features, classes, num_classes)) {}

  std::vector<double> score(const Matrix& query) const {
    Vector best = Vector::Constant(query.rows(), std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < gauss_.num_classes(); ++k) best = best.cwiseMin(gauss_.squared_distance(query, k));
    return {best.data(), best.data() + best.size()};
  }

  const SharedCovarianceGaussian& model() const { return gauss_; }

 private:
  SharedCovarianceGaussian gauss_;
};

inline std::vector<double> mahalanobis_score(const Matrix& train_features, const std::vector<int>& classes,
                                             std::size_t num_classes, const Matrix& query) {
  return MahalanobisScorer(train_features, classes, num_classes).score(query);
}

struct Threshold {
  double tau = 0.0;
  double target_tpr = 0.95;
  std::size_t calibration_size = 0;
  double achieved_tpr = 0.0;
};

/// Smallest observed score tau such that at least target_tpr of the ID
/// scores satisfy score <= tau.
inline Threshold calibrate_tau(std::span<const double> id_scores, double target_tpr = 0.95) {
  if (id_scores.empty()) throw InvalidInput("calibrate_tau: no ID scores");
  if (!(target_tpr > 0.0 && target_tpr <= 1.0)) throw InvalidInput("calibrate_tau: target must be in (0, 1]");
  std::vector<double> sorted(id_scores.begin(), id_scores.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const auto frac = [n](std::size_t k) { return static_cast<double>(k) / static_cast<double>(n); };
  auto k = static_cast<std::size_t>(std::ceil(target_tpr * static_cast<double>(n)));
  k = std::clamp<std::size_t>(k, 1, n);
  while (k > 1 && frac(k - 1) >= target_tpr) --k;
  while (k < n && frac(k) < target_tpr) ++k;
  Threshold t;
  t.tau = sorted[k - 1];
  t.target_tpr = target_tpr;
  t.calibration_size = n;
  const auto accepted = std::upper_bound(sorted.begin(), sorted.end(), t.tau) - sorted.begin();
  t.achieved_tpr = frac(static_cast<std::size_t>(accepted));
  return t;
}

/// ID iff score <= tau.
inline Truth classify(double score, const Threshold& t) { return score <= t.tau ? Truth::id : Truth::ood; }

inline std::vector<Truth> classify(std::span<const double> scores, const Threshold& t) {
  std::vector<Truth> out;
  out.reserve(scores.size());
  for (double s : scores) out.push_back(classify(s, t));
  return out;
}

}  // namespace lsvos

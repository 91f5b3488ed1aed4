#pragma once

// AUROC, AUPR, FPR at a target TPR, and expected calibration error.
// OOD is the positive class for AUROC (higher score = more anomalous);
// AUPR takes the positive class as a parameter.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lsvos/errors.hpp"
#include "lsvos/scoring.hpp"

namespace lsvos {

namespace detail {

inline void require_both_classes(const ScoreSet& s, const char* what) {
  s.validate();
  if (s.count(Truth::id) == 0 || s.count(Truth::ood) == 0) {
    throw UndefinedMetric(std::string(what) + ": needs both ID and OOD items");
  }
}

}  // namespace detail

/// P(OOD score > ID score) + 0.5 P(equal), via mid-ranks.
inline double auroc(const ScoreSet& s) {
  detail::require_both_classes(s, "auroc");
  const std::size_t n = s.scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });
  double ood_rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && s.scores[order[j]] == s.scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t t = i; t < j; ++t) {
      if (s.truth[order[t]] == Truth::ood) ood_rank_sum += mid_rank;
    }
    i = j;
  }
  const auto n_ood = static_cast<double>(s.count(Truth::ood));
  const auto n_id = static_cast<double>(s.count(Truth::id));
  return (ood_rank_sum - n_ood * (n_ood + 1.0) / 2.0) / (n_ood * n_id);
}

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
};

namespace detail {

/// Items ordered from most to least "positive"; ties grouped. Calls
/// visit(tp, fp) after each tie group.
template <typename Visit>
void sweep_positive(const ScoreSet& s, Truth positive, Visit visit) {
  const std::size_t n = s.scores.size();
  // Positive-ness key: ID items are accepted at low scores.
  auto key = [&](std::size_t i) { return positive == Truth::id ? -s.scores[i] : s.scores[i]; };
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) > key(b); });
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && key(order[j]) == key(order[i])) {
      (s.truth[order[j]] == positive ? tp : fp) += 1;
      ++j;
    }
    visit(tp, fp);
    i = j;
  }
}

}  // namespace detail

/// Step-interpolated area under precision-recall: sum of (R_i - R_{i-1}) P_i
/// over distinct thresholds.
inline double aupr(const ScoreSet& s, Truth positive = Truth::id) {
  s.validate();
  const auto n_pos = static_cast<double>(s.count(positive));
  if (n_pos == 0) throw UndefinedMetric("aupr: positive class absent");
  double area = 0.0;
  double prev_recall = 0.0;
  detail::sweep_positive(s, positive, [&](std::size_t tp, std::size_t fp) {
    const double recall = static_cast<double>(tp) / n_pos;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  });
  return area;
}

/// Precision-recall points (x = recall, y = precision).
inline std::vector<CurvePoint> pr_curve(const ScoreSet& s, Truth positive = Truth::id) {
  s.validate();
  const auto n_pos = static_cast<double>(s.count(positive));
  if (n_pos == 0) throw UndefinedMetric("pr_curve: positive class absent");
  std::vector<CurvePoint> pts;
  detail::sweep_positive(s, positive, [&](std::size_t tp, std::size_t fp) {
    pts.push_back({static_cast<double>(tp) / n_pos, static_cast<double>(tp) / static_cast<double>(tp + fp)});
  });
  return pts;
}

/// ROC points as the acceptance threshold rises: x = fraction of OOD
/// accepted, y = fraction of ID accepted. Starts at (0, 0).
inline std::vector<CurvePoint> roc_curve(const ScoreSet& s) {
  detail::require_both_classes(s, "roc_curve");
  const auto n_id = static_cast<double>(s.count(Truth::id));
  const auto n_ood = static_cast<double>(s.count(Truth::ood));
  std::vector<CurvePoint> pts{{0.0, 0.0}};
  detail::sweep_positive(s, Truth::id, [&](std::size_t tp, std::size_t fp) {
    pts.push_back({static_cast<double>(fp) / n_ood, static_cast<double>(tp) / n_id});
  });
  return pts;
}

/// Fraction of OOD items accepted (score <= tau) when tau is calibrated to
/// accept `tpr` of the ID items.
inline double fpr_at_tpr(const ScoreSet& s, double tpr = 0.95) {
  detail::require_both_classes(s, "fpr_at_tpr");
  const auto id_scores = s.scores_of(Truth::id);
  const Threshold t = calibrate_tau(id_scores, tpr);
  const auto ood = s.scores_of(Truth::ood);
  const auto accepted = std::count_if(ood.begin(), ood.end(), [&](double x) { return x <= t.tau; });
  return static_cast<double>(accepted) / static_cast<double>(ood.size());
}

/// Equal-width bins over [0, 1]: sum over bins of (n_b / N) |acc_b - conf_b|.
inline double ece(std::span<const double> confidences, std::span<const std::uint8_t> correct,
                  std::size_t n_bins = 10) {
  if (confidences.empty()) throw InvalidInput("ece: empty input");
  if (confidences.size() != correct.size()) throw InvalidInput("ece: confidence/correct length mismatch");
  if (n_bins == 0) throw InvalidInput("ece: need at least one bin");
  std::vector<double> conf_sum(n_bins, 0.0);
  std::vector<double> hit_sum(n_bins, 0.0);
  std::vector<std::size_t> count(n_bins, 0);
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const double c = confidences[i];
    if (!(c >= 0.0 && c <= 1.0)) throw InvalidInput("ece: confidence outside [0, 1]");
    const auto b = std::min(static_cast<std::size_t>(c * static_cast<double>(n_bins)), n_bins - 1);
    conf_sum[b] += c;
    hit_sum[b] += correct[i] ? 1.0 : 0.0;
    count[b] += 1;
  }
  const auto n = static_cast<double>(confidences.size());
  double total = 0.0;
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (count[b] == 0) continue;
    const auto nb = static_cast<double>(count[b]);
    total += (nb / n) * std::abs(hit_sum[b] / nb - conf_sum[b] / nb);
  }
  return total;
}

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t id_count = 0;
  std::size_t ood_count = 0;
};

inline std::vector<HistogramBin> score_histogram(const ScoreSet& s, std::size_t n_bins = 30) {
  s.validate();
  if (s.scores.empty() || n_bins == 0) return {};
  const auto [mn, mx] = std::minmax_element(s.scores.begin(), s.scores.end());
  const double lo = *mn;
  const double width = *mx > *mn ? (*mx - *mn) / static_cast<double>(n_bins) : 1.0;
  std::vector<HistogramBin> bins(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    bins[b].lo = lo + width * static_cast<double>(b);
    bins[b].hi = lo + width * static_cast<double>(b + 1);
  }
  for (std::size_t i = 0; i < s.scores.size(); ++i) {
    const auto b = std::min(static_cast<std::size_t>((s.scores[i] - lo) / width), n_bins - 1);
    (s.truth[i] == Truth::id ? bins[b].id_count : bins[b].ood_count) += 1;
  }
  return bins;
}

/// Metrics for one scoring method on one evaluation set.
struct MethodMetrics {
  std::string method;
  double auroc = 0.0;
  double aupr_id = 0.0;   // ID as positive class
  double aupr_ood = 0.0;  // OOD as positive class
  double fpr95 = 0.0;
  std::optional<double> ece;
  double tau = 0.0;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
};

inline MethodMetrics evaluate_scores(const ScoreSet& s, double target_tpr = 0.95) {
  MethodMetrics m;
  m.method = s.method;
  m.auroc = auroc(s);
  m.aupr_id = aupr(s, Truth::id);
  m.aupr_ood = aupr(s, Truth::ood);
  m.fpr95 = fpr_at_tpr(s, target_tpr);
  m.tau = calibrate_tau(s.scores_of(Truth::id), target_tpr).tau;
  m.n_id = s.count(Truth::id);
  m.n_ood = s.count(Truth::ood);
  return m;
}

}  // namespace lsvos

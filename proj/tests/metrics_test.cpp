#include <gtest/gtest.h>

#include <chrono>

#include "lsvos/metrics.hpp"
#include "oracles.hpp"

using namespace lsvos;

namespace {

ScoreSet make_set(const std::vector<double>& id, const std::vector<double>& ood) {
  ScoreSet s;
  s.method = "t";
  for (double x : id) {
    s.scores.push_back(x);
    s.truth.push_back(Truth::id);
  }
  for (double x : ood) {
    s.scores.push_back(x);
    s.truth.push_back(Truth::ood);
  }
  return s;
}

double oracle_aupr(const ScoreSet& s, Truth positive) {
  std::vector<double> keys;
  std::vector<bool> pos;
  for (std::size_t i = 0; i < s.scores.size(); ++i) {
    keys.push_back(positive == Truth::id ? -s.scores[i] : s.scores[i]);
    pos.push_back(s.truth[i] == positive);
  }
  return oracle::aupr_enumerate(keys, pos);
}

ScoreSet random_set(Rng& rng) {
  const std::size_t n_id = 1 + rng.index(150), n_ood = 1 + rng.index(150);
  const double grid = rng.uniform() < 0.5 ? 0.25 : 0.0;  // half the sets carry ties
  auto draw = [&](double shift) {
    const double x = rng.normal() + shift;
    return grid > 0 ? std::round(x / grid) * grid : x;
  };
  std::vector<double> id(n_id), ood(n_ood);
  const double shift = rng.uniform(-1, 3);
  for (auto& x : id) x = draw(0.0);
  for (auto& x : ood) x = draw(shift);
  return make_set(id, ood);
}

}  // namespace

TEST(Auroc, HandCases) {
  EXPECT_DOUBLE_EQ(auroc(make_set({0.1, 0.4}, {0.3, 0.9})), 0.75);
  EXPECT_DOUBLE_EQ(auroc(make_set({1, 2, 3}, {4, 5})), 1.0);
  EXPECT_DOUBLE_EQ(auroc(make_set({7, 7, 7}, {7, 7})), 0.5);
}

TEST(Auroc, SingleClassIsUndefined) {
  EXPECT_THROW(auroc(make_set({1, 2}, {})), UndefinedMetric);
  EXPECT_THROW(auroc(make_set({}, {1, 2})), UndefinedMetric);
  EXPECT_THROW(fpr_at_tpr(make_set({1, 2}, {})), UndefinedMetric);
}

TEST(Aupr, HandCases) {
  const auto s = make_set({0.1, 0.4}, {0.3, 0.9});
  EXPECT_NEAR(aupr(s), 5.0 / 6.0, 1e-15);
  EXPECT_NEAR(aupr(s), oracle_aupr(s, Truth::id), 1e-15);
  EXPECT_NEAR(aupr(s, Truth::ood), oracle_aupr(s, Truth::ood), 1e-15);
  EXPECT_DOUBLE_EQ(aupr(make_set({1, 2}, {3, 4})), 1.0);
  EXPECT_DOUBLE_EQ(aupr(make_set({1, 5, 2}, {})), 1.0);
  EXPECT_THROW(aupr(make_set({}, {1.0})), UndefinedMetric);
}

TEST(FprAtTpr, HandCases) {
  std::vector<double> id, ood;
  for (int i = 1; i <= 100; ++i) id.push_back(i);
  for (int i = 51; i <= 150; ++i) ood.push_back(i);
  EXPECT_EQ(fpr_at_tpr(make_set(id, ood)), 0.45);
  EXPECT_EQ(fpr_at_tpr(make_set({1, 2, 3}, {4, 5})), 0.0);
  EXPECT_EQ(fpr_at_tpr(make_set({3, 3, 3}, {3, 3})), 1.0);
}

TEST(Ece, HandCases) {
  const std::vector<double> ones(10, 1.0);
  std::vector<std::uint8_t> all(10, 1), half(10, 0);
  std::fill_n(half.begin(), 5, 1);
  EXPECT_EQ(ece(ones, all), 0.0);
  EXPECT_EQ(ece(ones, half), 0.5);
  // Bin [0.2, 0.3): four items at 0.25, two correct -> gap 0.25.
  // Bin [0.9, 1.0]: four items at 0.95, all correct -> gap 0.05.
  const std::vector<double> c{0.25, 0.25, 0.25, 0.25, 0.95, 0.95, 0.95, 0.95};
  const std::vector<std::uint8_t> k{1, 1, 0, 0, 1, 1, 1, 1};
  EXPECT_NEAR(ece(c, k), 0.5 * 0.25 + 0.5 * 0.05, 1e-15);
  // Same data, two bins: [0, 0.5) gap 0.25 and [0.5, 1] gap 0.05.
  EXPECT_NEAR(ece(c, k, 2), 0.15, 1e-15);
}

TEST(Ece, RejectsBadInput) {
  EXPECT_THROW(ece(std::vector<double>{}, std::vector<std::uint8_t>{}), InvalidInput);
  EXPECT_THROW(ece(std::vector<double>{1.5}, std::vector<std::uint8_t>{1}), InvalidInput);
  EXPECT_THROW(ece(std::vector<double>{0.5, 0.2}, std::vector<std::uint8_t>{1}), InvalidInput);
}

TEST(Metrics, MatchBruteForceOraclesOnRandomSets) {
  Rng rng(2024);
  const auto start = std::chrono::steady_clock::now();
  for (int t = 0; t < 100; ++t) {
    const ScoreSet s = random_set(rng);
    const auto id = s.scores_of(Truth::id), ood = s.scores_of(Truth::ood);
    EXPECT_NEAR(auroc(s), oracle::auroc_pairs(id, ood), 1e-9) << "set " << t;
    EXPECT_NEAR(aupr(s, Truth::id), oracle_aupr(s, Truth::id), 1e-9) << "set " << t;
    EXPECT_NEAR(aupr(s, Truth::ood), oracle_aupr(s, Truth::ood), 1e-9) << "set " << t;
    EXPECT_NEAR(fpr_at_tpr(s), oracle::fpr_enumerate(id, ood, 0.95), 1e-9) << "set " << t;
  }
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 10.0);
}

TEST(Auroc, InvariantUnderIncreasingTransform) {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    ScoreSet s = random_set(rng);
    const double base = auroc(s);
    for (auto& x : s.scores) x = std::atan(x) * 3.0 + 1.0;
    EXPECT_NEAR(auroc(s), base, 1e-12);
  }
}

TEST(Auroc, NegationComplementsWithoutTies) {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> id(40), ood(30);
    for (auto& x : id) x = rng.normal();
    for (auto& x : ood) x = rng.normal() + 0.5;
    ScoreSet s = make_set(id, ood);
    const double a = auroc(s);
    for (auto& x : s.scores) x = -x;
    EXPECT_NEAR(a + auroc(s), 1.0, 1e-12);
  }
}

TEST(Curves, EndpointsAndMonotonicity) {
  Rng rng(7);
  const ScoreSet s = random_set(rng);
  const auto roc = roc_curve(s);
  EXPECT_EQ(roc.front().x, 0.0);
  EXPECT_EQ(roc.back().x, 1.0);
  EXPECT_EQ(roc.back().y, 1.0);
  for (std::size_t i = 1; i < roc.size(); ++i) {
    EXPECT_GE(roc[i].x, roc[i - 1].x);
    EXPECT_GE(roc[i].y, roc[i - 1].y);
  }
  const auto pr = pr_curve(s);
  EXPECT_EQ(pr.back().x, 1.0);
}

TEST(Histogram, CountsEveryItem) {
  Rng rng(8);
  const ScoreSet s = random_set(rng);
  std::size_t id = 0, ood = 0;
  for (const auto& b : score_histogram(s, 17)) {
    id += b.id_count;
    ood += b.ood_count;
  }
  EXPECT_EQ(id, s.count(Truth::id));
  EXPECT_EQ(ood, s.count(Truth::ood));
}

TEST(EvaluateScores, BundlesAllMetrics) {
  const auto s = make_set({0.1, 0.4}, {0.3, 0.9});
  const auto m = evaluate_scores(s);
  EXPECT_DOUBLE_EQ(m.auroc, 0.75);
  EXPECT_NEAR(m.aupr_id, 5.0 / 6.0, 1e-15);
  EXPECT_EQ(m.n_id, 2u);
  EXPECT_EQ(m.n_ood, 2u);
  EXPECT_FALSE(m.ece.has_value());
}

#include <gtest/gtest.h>

#include <numbers>
#include <sstream>

#include "lsvos/geometry.hpp"
#include "oracles.hpp"

using namespace lsvos;

namespace {

Box3D random_box(Rng& rng) {
  return Box3D(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-1, 1), rng.uniform(0.5, 6), rng.uniform(0.5, 3),
               rng.uniform(0.5, 2.5), rng.uniform(-4, 4));
}

Box3D perturbed(const Box3D& b, Rng& rng, double scale) {
  return Box3D(b.x() + scale * rng.normal(), b.y() + scale * rng.normal(), b.z() + 0.3 * scale * rng.normal(),
               b.length() * rng.uniform(0.7, 1.3), b.width() * rng.uniform(0.7, 1.3), b.height() * rng.uniform(0.7, 1.3),
               b.yaw() + rng.uniform(-1.0, 1.0));
}

}  // namespace

TEST(Box3D, NormalizesYawAndRejectsDegenerate) {
  EXPECT_NEAR(Box3D(0, 0, 0, 1, 1, 1, 3 * std::numbers::pi).yaw(), std::numbers::pi, 1e-12);
  EXPECT_NEAR(Box3D(0, 0, 0, 1, 1, 1, -std::numbers::pi).yaw(), std::numbers::pi, 1e-12);
  EXPECT_THROW(Box3D(0, 0, 0, 0, 1, 1, 0), InvalidInput);
  EXPECT_THROW(Box3D(0, 0, 0, 1, -1, 1, 0), InvalidInput);
}

TEST(IouBev, IdenticalBoxesGiveOne) {
  Box3D a(1, 2, 0, 4, 2, 1.5, 0.7);
  EXPECT_NEAR(iou_bev(a, a), 1.0, 1e-12);
  EXPECT_NEAR(iou_3d(a, a), 1.0, 1e-12);
}

TEST(IouBev, DisjointFootprints) {
  Box3D a(0, 0, 0, 2, 2, 1, 0.3);
  Box3D b(10, 0, 0, 2, 2, 1, 1.1);
  EXPECT_EQ(iou_bev(a, b), 0.0);
}

TEST(IouBev, OffsetSquaresOneThird) {
  Box3D a(0, 0, 0, 2, 2, 1, 0);
  Box3D b(1, 0, 0, 2, 2, 1, 0);
  EXPECT_NEAR(iou_bev(a, b), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(iou_3d(a, b), 1.0 / 3.0, 1e-12);
}

TEST(IouBev, AxisAlignedAnalyticCases) {
  // 4x2 and 2x2 sharing a corner region 1x1: inter 1, union 8 + 4 - 1.
  EXPECT_NEAR(iou_bev(Box3D(0, 0, 0, 4, 2, 1, 0), Box3D(2, 1, 0, 2, 2, 1, 0)), 1.0 / 11.0, 1e-12);
  // 90 degree rotation of a square is the same footprint.
  EXPECT_NEAR(iou_bev(Box3D(0, 0, 0, 2, 2, 1, 0), Box3D(0, 0, 0, 2, 2, 1, std::numbers::pi / 2)), 1.0, 1e-12);
  // Nested: small inside large.
  EXPECT_NEAR(iou_bev(Box3D(0, 0, 0, 4, 4, 1, 0), Box3D(0.5, 0, 0, 2, 1, 1, 0)), 2.0 / 16.0, 1e-12);
  // Half vertical overlap: 3D IoU = 1 * 0.5 / (1 + 1 - 0.5).
  EXPECT_NEAR(iou_3d(Box3D(0, 0, 0, 2, 2, 1, 0), Box3D(0, 0, 0.5, 2, 2, 1, 0)), 1.0 / 3.0, 1e-12);
}

TEST(Iou3d, VerticallyDisjoint) {
  EXPECT_EQ(iou_3d(Box3D(0, 0, 0, 2, 2, 1, 0), Box3D(0, 0, 5, 2, 2, 1, 0)), 0.0);
}

TEST(Iou3d, EqualsBevWhenVerticalExtentsCoincide) {
  Rng rng(21);
  for (int i = 0; i < 50; ++i) {
    Box3D a = random_box(rng);
    Box3D b(a.x() + rng.normal(), a.y() + rng.normal(), a.z(), rng.uniform(0.5, 5), rng.uniform(0.5, 3), a.height(),
            rng.uniform(-3, 3));
    EXPECT_NEAR(iou_3d(a, b), iou_bev(a, b), 1e-12);
  }
}

TEST(Iou, SymmetricBoundedAndRigidInvariant) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    Box3D a = random_box(rng);
    Box3D b = perturbed(a, rng, 1.0);
    const double ab = iou_3d(a, b);
    EXPECT_NEAR(ab, iou_3d(b, a), 1e-12);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    const double theta = rng.uniform(-3, 3), tx = rng.uniform(-50, 50), ty = rng.uniform(-50, 50), tz = rng.normal();
    auto move = [&](const Box3D& box) {
      const double c = std::cos(theta), s = std::sin(theta);
      return Box3D(c * box.x() - s * box.y() + tx, s * box.x() + c * box.y() + ty, box.z() + tz, box.length(),
                   box.width(), box.height(), box.yaw() + theta);
    };
    EXPECT_NEAR(iou_3d(move(a), move(b)), ab, 1e-9);
    EXPECT_NEAR(iou_bev(move(a), move(b)), iou_bev(a, b), 1e-9);
  }
}

TEST(Iou3d, MatchesMonteCarloOnRotatedPairs) {
  Rng rng(99);
  for (int i = 0; i < 10; ++i) {
    Box3D a = random_box(rng);
    Box3D b = perturbed(a, rng, 0.6);
    EXPECT_NEAR(iou_3d(a, b), oracle::iou_monte_carlo(a, b, 200000, 1000 + i), 0.01) << "pair " << i;
  }
}

TEST(LabelDetections, ThresholdsPerClass) {
  const Box3D car(0, 0, 0, 4, 2, 1.5, 0);
  std::vector<GroundTruth> gts{{car, 0}, {Box3D(20, 0, 0, 1, 1, 1.8, 0), 1}};
  const auto th = default_iou_thresholds();
  // Shift along length so the IoU is exactly 0.69: overlap (4 - d) / (4 + d).
  const double d_069 = 4.0 * (1 - 0.69) / (1 + 0.69);
  // Pedestrian shifted to IoU 0.55: (1 - d) / (1 + d).
  const double d_055 = (1 - 0.55) / (1 + 0.55);
  std::vector<Detection> preds{{car, 0, 0.9},
                               {Box3D(d_069, 0, 0, 4, 2, 1.5, 0), 0, 0.8},
                               {Box3D(20 + d_055, 0, 0, 1, 1, 1.8, 0), 1, 0.7},
                               {car, 1, 0.9}};
  ASSERT_NEAR(iou_3d(preds[1].box, car), 0.69, 1e-12);
  ASSERT_NEAR(iou_3d(preds[2].box, gts[1].box), 0.55, 1e-12);
  const auto labels = label_detections(preds, gts, th);
  EXPECT_EQ(labels[0], FeatureLabel::id);
  EXPECT_EQ(labels[1], FeatureLabel::fp);
  EXPECT_EQ(labels[2], FeatureLabel::id);
  EXPECT_EQ(labels[3], FeatureLabel::fp);  // overlaps a car but predicts pedestrian
}

TEST(LabelDetections, NoGroundTruthMeansAllFp) {
  std::vector<Detection> preds{{Box3D(0, 0, 0, 1, 1, 1, 0), 0, 0.5}};
  EXPECT_EQ(label_detections(preds, {}, default_iou_thresholds())[0], FeatureLabel::fp);
}

TEST(LabelDetections, MissingThresholdRejected) {
  std::vector<Detection> preds{{Box3D(0, 0, 0, 1, 1, 1, 0), 5, 0.5}};
  EXPECT_THROW(label_detections(preds, {}, default_iou_thresholds()), InvalidInput);
}

TEST(SceneCsv, RoundTrip) {
  Scene s;
  s.ground_truths.push_back({Box3D(1, 2, 0.5, 4, 2, 1.5, 0.25), 0});
  s.predictions.push_back({Box3D(1.1, 2, 0.5, 4, 2, 1.5, 0.3), 0, 0.875});
  std::stringstream ss;
  write_scene_csv(ss, s);
  EXPECT_EQ(ss.str().substr(0, 40), "kind,class_id,x,y,z,l,w,h,yaw,confidence");
  const Scene back = read_scene_csv(ss);
  ASSERT_EQ(back.ground_truths.size(), 1u);
  ASSERT_EQ(back.predictions.size(), 1u);
  EXPECT_EQ(back.predictions[0].box.x(), 1.1);
  EXPECT_EQ(back.predictions[0].confidence, 0.875);
  EXPECT_EQ(back.ground_truths[0].box.yaw(), 0.25);
}

TEST(SceneCsv, RejectsMalformedRows) {
  std::stringstream bad("kind,class_id,x,y,z,l,w,h,yaw,confidence\nfoo,0,0,0,0,1,1,1,0,0.5\n");
  EXPECT_THROW(read_scene_csv(bad), FormatError);
  std::stringstream degenerate("kind,class_id,x,y,z,l,w,h,yaw,confidence\ngt,0,0,0,0,0,1,1,0,\n");
  EXPECT_THROW(read_scene_csv(degenerate), FormatError);
}

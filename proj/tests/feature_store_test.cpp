#include <gtest/gtest.h>

#include <sstream>

#include "lsvos/feature_store.hpp"

using namespace lsvos;

namespace {

FeatureRecord rec(std::vector<double> v, int cls, FeatureLabel l = FeatureLabel::id) {
  return {std::move(v), cls, l, "t"};
}

FeatureDataset small_dataset(Rng& rng, std::size_t n = 50) {
  FeatureDataset ds;
  ds.dim = 4;
  ds.num_classes = 3;
  ds.class_names = {"a", "b", "c"};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(4);
    for (auto& x : v) x = static_cast<double>(static_cast<float>(rng.normal()));
    ds.records.push_back(rec(v, static_cast<int>(rng.index(3)), static_cast<FeatureLabel>(rng.index(3))));
  }
  return ds;
}

}  // namespace

TEST(AugmentOneHot, AppendsClassIndicator) {
  const auto out = augment_one_hot(rec({0.5, -1}, 0), 3);
  EXPECT_EQ(out, (std::vector<double>{0.5, -1, 1, 0, 0}));
  const auto last = augment_one_hot(rec({0.5, -1}, 2), 3);
  EXPECT_EQ(std::vector<double>(last.end() - 3, last.end()), (std::vector<double>{0, 0, 1}));
}

TEST(AugmentOneHot, SuffixAlwaysSumsToOne) {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const std::size_t k = 1 + rng.index(8);
    const auto out = augment_one_hot(rec({rng.normal(), rng.normal()}, static_cast<int>(rng.index(k))), k);
    double s = 0;
    for (std::size_t j = 2; j < out.size(); ++j) s += out[j];
    EXPECT_EQ(s, 1.0);
  }
}

TEST(AugmentOneHot, RejectsClassOutOfRange) {
  EXPECT_THROW(augment_one_hot(rec({1.0}, 3), 3), InvalidInput);
  EXPECT_THROW(augment_one_hot(rec({1.0}, -1), 3), InvalidInput);
}

TEST(FeatureQueue, EvictsOldestFirst) {
  FeatureQueue q(1, 2, 2);
  for (double v : {1.0, 2.0, 3.0}) q.push(rec({v}, 0));
  ASSERT_EQ(q.size(0), 2u);
  EXPECT_EQ(q.buffer(0)[0][0], 2.0);
  EXPECT_EQ(q.buffer(0)[1][0], 3.0);
}

TEST(FeatureQueue, ClassesAreIsolated) {
  FeatureQueue q(1, 2, 3);
  q.push(rec({9.0}, 1));
  for (int i = 0; i < 10; ++i) q.push(rec({static_cast<double>(i)}, 0));
  ASSERT_EQ(q.size(1), 1u);
  EXPECT_EQ(q.buffer(1)[0], (std::vector<double>{9.0, 0.0, 1.0}));
}

TEST(FeatureQueue, CapacityThousandKeepsLastThousand) {
  FeatureQueue q(1, 1, 1000);
  for (int i = 0; i < 1500; ++i) q.push(rec({static_cast<double>(i)}, 0));
  ASSERT_EQ(q.size(0), 1000u);
  for (std::size_t i = 0; i < 1000; ++i) EXPECT_EQ(q.buffer(0)[i][0], static_cast<double>(500 + i));
}

TEST(FeatureQueue, OccupancyMonotoneThenConstant) {
  FeatureQueue q(2, 1, 7);
  std::size_t prev = 0;
  for (int i = 0; i < 20; ++i) {
    q.push(rec({1.0, 2.0}, 0));
    EXPECT_EQ(q.size(0), std::min<std::size_t>(prev + 1, 7));
    prev = q.size(0);
  }
}

TEST(FeatureQueue, OnlyIdFeaturesAccepted) {
  FeatureQueue q(1, 1, 4);
  EXPECT_THROW(q.push(rec({1.0}, 0, FeatureLabel::fp)), InvalidInput);
  EXPECT_THROW(q.push(rec({1.0}, 0, FeatureLabel::synth_outlier)), InvalidInput);
  EXPECT_THROW(q.push(rec({1.0, 2.0}, 0)), InvalidInput);
}

TEST(FeatureQueue, SampleShapeAndStratification) {
  FeatureQueue q(2, 3, 10);
  Rng rng(4);
  for (int i = 0; i < 30; ++i) q.push(rec({rng.normal(), rng.normal()}, i % 3));
  const Matrix s = q.sample(500, rng);
  ASSERT_EQ(s.rows(), 1500);
  ASSERT_EQ(s.cols(), 5);
  const RowVector per_class = s.rightCols(3).colwise().sum();
  EXPECT_EQ(per_class(0), 500.0);
  EXPECT_EQ(per_class(1), 500.0);
  EXPECT_EQ(per_class(2), 500.0);
}

TEST(FeatureQueue, SingleElementBuffersSampleDeterministically) {
  FeatureQueue q(1, 2, 5);
  q.push(rec({3.0}, 0));
  q.push(rec({4.0}, 1));
  Rng rng(0);
  const Matrix s = q.sample(1, rng);
  EXPECT_EQ(s(0, 0), 3.0);
  EXPECT_EQ(s(1, 0), 4.0);
  EXPECT_EQ(s(1, 2), 1.0);
}

TEST(FeatureQueue, EmptyClassIsNotReady) {
  FeatureQueue q(1, 2, 5);
  q.push(rec({3.0}, 0));
  EXPECT_FALSE(q.ready());
  Rng rng(0);
  EXPECT_THROW(q.sample(1, rng), NotReady);
}

TEST(FeatureFile, BinaryRoundTripIsBitExact) {
  Rng rng(8);
  const FeatureDataset ds = small_dataset(rng);
  std::stringstream ss;
  write_feature_file(ss, ds);
  const FeatureDataset back = read_feature_file(ss);
  ASSERT_EQ(back.records.size(), ds.records.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    EXPECT_EQ(back.records[i].vector, ds.records[i].vector);
    EXPECT_EQ(back.records[i].class_id, ds.records[i].class_id);
    EXPECT_EQ(back.records[i].label, ds.records[i].label);
  }
  std::stringstream again;
  write_feature_file(again, back);
  EXPECT_EQ(again.str(), ss.str());
}

TEST(FeatureFile, HeaderLayout) {
  FeatureDataset ds;
  ds.dim = 2;
  ds.num_classes = 3;
  ds.records.push_back(rec({1.0, -2.0}, 2, FeatureLabel::fp));
  std::stringstream ss;
  write_feature_file(ss, ds);
  const std::string b = ss.str();
  ASSERT_EQ(b.size(), 4u + 4 + 4 + 4 + 8 + (2 + 1 + 8));
  EXPECT_EQ(b.substr(0, 4), "VOSF");
  EXPECT_EQ(b[4], 1);   // version
  EXPECT_EQ(b[8], 2);   // D
  EXPECT_EQ(b[12], 3);  // K
  EXPECT_EQ(b[16], 1);  // count
  EXPECT_EQ(b[24], 2);  // class id
  EXPECT_EQ(b[26], 1);  // label FP
  // 1.0f little-endian = 00 00 80 3f
  EXPECT_EQ(static_cast<unsigned char>(b[30]), 0x3f);
}

TEST(FeatureFile, RejectsCorruptInput) {
  std::stringstream bad("VOSX");
  EXPECT_THROW(read_feature_file(bad), FormatError);
  Rng rng(8);
  std::stringstream ss;
  write_feature_file(ss, small_dataset(rng, 3));
  std::stringstream truncated(ss.str().substr(0, ss.str().size() - 2));
  EXPECT_THROW(read_feature_file(truncated), FormatError);
}

TEST(FeatureFile, CsvRoundTrip) {
  Rng rng(12);
  const FeatureDataset ds = small_dataset(rng, 20);
  std::stringstream ss;
  write_feature_csv(ss, ds);
  EXPECT_EQ(ss.str().substr(0, 24), "class_id,label,f0,f1,f2,");
  const FeatureDataset back = read_feature_csv(ss, 3);
  ASSERT_EQ(back.records.size(), 20u);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(back.records[i].vector, ds.records[i].vector);
}

TEST(FeatureDataset, ValidateCatchesBadRecords) {
  FeatureDataset ds;
  ds.dim = 2;
  ds.num_classes = 2;
  ds.records.push_back(rec({1.0}, 0));
  EXPECT_THROW(ds.validate(), InvalidInput);
  ds.records[0] = rec({1.0, 2.0}, 5);
  EXPECT_THROW(ds.validate(), InvalidInput);
  ds.records[0] = rec({1.0, std::nan("")}, 0);
  EXPECT_THROW(ds.validate(), InvalidInput);
}

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "lsvos/synthesis.hpp"

using namespace lsvos;

namespace {

ModelDims small_dims() {
  ModelDims m;
  m.feature_dim = 6;
  m.num_classes = 3;
  m.encoder_widths = {10, 8};
  m.decoder_hidden = {9};
  return m;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

std::vector<int> random_classes(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<int> c(n);
  for (auto& x : c) x = static_cast<int>(rng.index(k));
  return c;
}

AutoEncoder trained_ae(Rng& rng) {
  auto ae = AutoEncoder::create(small_dims(), rng);
  ae.set_trained_steps(1);
  return ae;
}

}  // namespace

TEST(LsvosSynthesize, ZeroBetaEqualsReconstruction) {
  Rng rng(1);
  const auto ae = trained_ae(rng);
  const Matrix u = random_matrix(20, 6, rng);
  const auto cls = random_classes(20, 3, rng);
  Rng noise_rng(2);
  const auto out = lsvos_synthesize(ae, u, cls, {0.25, 0.0}, noise_rng);
  const Matrix expect = ae.reconstruct(augment_one_hot(u, cls, 3));
  ASSERT_EQ(out.vectors.rows(), 20);
  ASSERT_EQ(out.vectors.cols(), 6);
  EXPECT_TRUE(out.vectors == expect);
}

TEST(LsvosSynthesize, NoiseComponentsInDefaultRange) {
  Rng rng(3);
  const auto ae = trained_ae(rng);
  const auto out = lsvos_synthesize(ae, random_matrix(500, 6, rng), random_classes(500, 3, rng), {}, rng);
  ASSERT_TRUE(out.latent_noise.has_value());
  EXPECT_EQ(out.latent_noise->cols(), 8);
  EXPECT_GE(out.latent_noise->minCoeff(), 0.25);
  EXPECT_LE(out.latent_noise->maxCoeff(), 1.25);
  EXPECT_TRUE(out.vectors.allFinite());
}

TEST(LsvosSynthesize, NoiseNormGrowsWithBeta) {
  Rng rng(4);
  const auto ae = trained_ae(rng);
  const Matrix u = random_matrix(1000, 6, rng);
  const auto cls = random_classes(1000, 3, rng);
  double prev = -1.0;
  for (double beta : {0.1, 1.0, 10.0}) {
    const auto out = lsvos_synthesize(ae, u, cls, {0.25, beta}, rng);
    const double mean_norm = out.latent_noise->rowwise().norm().mean();
    // E||o|| is close to beta * sqrt(D' * E(alpha + U)^2) with E(alpha + U)^2 = 0.5625 + 1/12.
    EXPECT_NEAR(mean_norm, beta * std::sqrt(8 * (0.5625 + 1.0 / 12.0)), 0.05 * beta);
    EXPECT_GT(mean_norm, prev);
    prev = mean_norm;
  }
}

TEST(LsvosSynthesize, UntrainedAutoEncoderNotReady) {
  Rng rng(5);
  const auto ae = AutoEncoder::create(small_dims(), rng);
  EXPECT_THROW(lsvos_synthesize(ae, random_matrix(2, 6, rng), {0, 1}, {}, rng), NotReady);
}

TEST(LsvosSynthesize, RejectsBadNoiseAndShapes) {
  Rng rng(6);
  const auto ae = trained_ae(rng);
  EXPECT_THROW(lsvos_synthesize(ae, random_matrix(2, 6, rng), {0, 1}, {-0.1, 1.0}, rng), InvalidInput);
  EXPECT_THROW(lsvos_synthesize(ae, random_matrix(2, 6, rng), {0, 1}, {0.25, NAN}, rng), InvalidInput);
  EXPECT_THROW(lsvos_synthesize(ae, random_matrix(2, 9, rng), {0, 1}, {}, rng), InvalidInput);
}

TEST(VosSynthesize, KeepsLeastLikelyCandidates) {
  Rng rng(7);
  const Matrix feats = random_matrix(300, 4, rng);
  const auto cls = random_classes(300, 2, rng);
  const VosParams params{50, 2000};
  Rng a(8), b(8);
  const auto out = vos_synthesize(feats, cls, 2, params, a);
  ASSERT_EQ(out.vectors.rows(), 100);
  const auto gauss = SharedCovarianceGaussian::fit(feats, cls, 2);
  for (std::size_t k = 0; k < 2; ++k) {
    const Matrix cand = gauss.sample(k, 2000, b);
    const Vector ll = gauss.log_likelihood(cand, k);
    const Vector kept_ll = gauss.log_likelihood(out.vectors.middleRows(static_cast<Eigen::Index>(50 * k), 50), k);
    std::vector<double> sorted(ll.data(), ll.data() + ll.size());
    std::sort(sorted.begin(), sorted.end());
    // Every kept candidate is at most the 50th smallest; every other is at least that.
    EXPECT_LE(kept_ll.maxCoeff(), sorted[49]);
    EXPECT_LT(sorted[49], sorted[50]);
    for (int i = 0; i < 50; ++i) EXPECT_EQ(out.classes[50 * k + static_cast<std::size_t>(i)], static_cast<int>(k));
  }
}

TEST(VosSynthesize, OneDimensionalTailCutoff) {
  Rng rng(9);
  const Matrix feats = random_matrix(20000, 1, rng);
  const std::vector<int> cls(20000, 0);
  const auto gauss = SharedCovarianceGaussian::fit(feats, cls, 1);
  const double mu = gauss.means()(0, 0), sd = std::sqrt(gauss.covariance()(0, 0));
  const auto out = vos_synthesize(feats, cls, 1, {5000, 100000}, rng);
  double min_abs = INFINITY;
  for (Eigen::Index i = 0; i < out.vectors.rows(); ++i) min_abs = std::min(min_abs, std::abs(out.vectors(i, 0) - mu) / sd);
  // Two-sided 5% tail of a unit Gaussian starts at 1.95996.
  EXPECT_NEAR(min_abs, 1.95996, 0.03);
}

TEST(VosSynthesize, DefaultSizesGiveFifteenHundred) {
  Rng rng(10);
  const Matrix feats = random_matrix(600, 3, rng);
  const auto out = vos_synthesize(feats, random_classes(600, 3, rng), 3, VosParams{}, rng);
  EXPECT_EQ(out.vectors.rows(), 1500);
  EXPECT_EQ(out.vectors.cols(), 3);
  EXPECT_DOUBLE_EQ(VosParams{}.tail_fraction(), 0.05);
}

TEST(VosSynthesize, RejectsBadParams) {
  Rng rng(1);
  const Matrix feats = random_matrix(10, 2, rng);
  const std::vector<int> cls(10, 0);
  EXPECT_THROW(vos_synthesize(feats, cls, 1, {0, 10}, rng), InvalidInput);
  EXPECT_THROW(vos_synthesize(feats, cls, 1, {20, 10}, rng), InvalidInput);
  EXPECT_THROW(vos_synthesize(feats, cls, 2, {1, 10}, rng), InvalidInput);  // class 1 empty
}

TEST(LinearMix, MidpointAndDegenerateWeight) {
  Rng rng(11);
  Matrix id(1, 2), fp(1, 2);
  id << 2, 0;
  fp << 0, 2;
  const auto out = linear_mix(id, fp, 0.5, rng);
  EXPECT_EQ(out.vectors(0, 0), 1.0);
  EXPECT_EQ(out.vectors(0, 1), 1.0);
  const Matrix many = random_matrix(30, 4, rng);
  EXPECT_TRUE(linear_mix(many, random_matrix(5, 4, rng), 1.0, rng).vectors == many);
}

TEST(LinearMix, EmptyFpIsNotReady) {
  Rng rng(12);
  EXPECT_THROW(linear_mix(random_matrix(3, 2, rng), Matrix(0, 2), 0.5, rng), NotReady);
  EXPECT_THROW(linear_mix(random_matrix(3, 2, rng), random_matrix(3, 2, rng), 1.5, rng), InvalidInput);
}

TEST(RandomNoise, MomentsWithinCltBound) {
  Rng rng(13);
  const auto out = random_noise(1000, 1000, rng);
  const double n = static_cast<double>(out.vectors.size());
  const double mean = out.vectors.mean();
  const double var = (out.vectors.array() - mean).square().sum() / (n - 1);
  const double tol = 4.0 / std::sqrt(n);
  EXPECT_LT(std::abs(mean), tol);
  EXPECT_LT(std::abs(var - 1.0), tol);
}

TEST(RandomNoise, SeedReproducesBitExactly) {
  Rng a(14), b(14);
  EXPECT_TRUE(random_noise(50, 7, a).vectors == random_noise(50, 7, b).vectors);
}

TEST(NoisyId, ShiftInUnitInterval) {
  Rng rng(15);
  const Matrix u = random_matrix(2000, 8, rng);
  const auto out = noisy_id(u, rng);
  const Matrix diff = out.vectors - u;
  EXPECT_GE(diff.minCoeff(), 0.0);
  EXPECT_LT(diff.maxCoeff(), 1.0);
  EXPECT_NEAR(diff.mean(), 0.5, 0.01);
}

TEST(Synthesize, AllMethodsDeterministicAndDimensionD) {
  Rng rng(16);
  const auto ae = trained_ae(rng);
  const Matrix u = random_matrix(12, 6, rng);
  const auto cls = random_classes(12, 3, rng);
  const Matrix fp = random_matrix(5, 6, rng);
  FeatureQueue q(6, 3, 50);
  for (int i = 0; i < 60; ++i) {
    Matrix row = random_matrix(1, 6, rng);
    q.push_batch(row, {i % 3});
  }
  SynthInputs in{&ae, &u, &cls, &fp, &q};
  SynthParams params;
  params.vos_candidates = 200;
  for (auto m : {SynthMethod::lsvos, SynthMethod::vos, SynthMethod::linear_mix, SynthMethod::random_noise,
                 SynthMethod::noisy_id}) {
    Rng a(77), b(77);
    const auto x = synthesize(m, in, params, a);
    const auto y = synthesize(m, in, params, b);
    EXPECT_TRUE(x.vectors == y.vectors) << to_string(m);
    EXPECT_EQ(x.vectors.cols(), 6) << to_string(m);
    EXPECT_EQ(x.vectors.rows(), 12) << to_string(m);
    EXPECT_TRUE(x.vectors.allFinite()) << to_string(m);
    EXPECT_EQ(parse_synth_method(to_string(m)), m);
  }
}

TEST(Synthesize, VosNeedsReadyQueue) {
  Rng rng(17);
  const Matrix u = random_matrix(3, 6, rng);
  FeatureQueue q(6, 3, 10);
  SynthInputs in;
  in.u_id = &u;
  in.queue = &q;
  EXPECT_THROW(synthesize(SynthMethod::vos, in, {}, rng), NotReady);
  EXPECT_THROW(parse_synth_method("gan"), InvalidInput);
}

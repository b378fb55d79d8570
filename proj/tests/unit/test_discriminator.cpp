#include <gtest/gtest.h>

#include "retts/discriminator.hpp"
#include "retts/error.hpp"
#include "retts/lamb.hpp"
#include "retts/losses.hpp"
#include "retts/ops.hpp"

using namespace retts;

TEST(Discriminator, DefaultShapeAndFeatures) {
  TrainConfig cfg;
  RngStream rng(1, "disc");
  const Discriminator d(20, cfg, rng);
  EXPECT_EQ(d.chunk_frames(), 32u);
  const auto out = d(rng_normal(rng, {32, 20}));
  EXPECT_EQ(out.score.numel(), 1u);
  ASSERT_EQ(out.features.size(), 4u);
  const std::size_t frames[4] = {16, 8, 4, 2};
  for (std::size_t l = 0; l < 4; ++l) {
    EXPECT_EQ(out.features[l].dim(0), frames[l]);
    EXPECT_EQ(out.features[l].dim(1), cfg.disc_channels[l]);
  }
}

TEST(Discriminator, HingeFallsUnderLamb) {
  // a fixed real/fake pair; LAMB at the stage-2 critic lr must separate them
  RngStream rng(2, "disc");
  TrainConfig cfg;
  cfg.disc_channels = {8, 8};
  const Discriminator d(4, cfg, rng);
  const Tensor real = rng_normal(rng, {32, 4});
  const Tensor fake = scale(real, 0.5);
  std::vector<Tensor> params;
  for (const auto& p : d.parameters()) params.push_back(p.tensor);
  LambState state;
  auto hinge = [&] { return hinge_d_loss(d(real).score, d(fake).score); };
  const double before = hinge().item();
  for (int i = 0; i < 200; ++i) {
    for (auto& p : params) p.zero_grad();
    backward(hinge());
    lamb_step(params, state, cfg.stage2_lr_disc, LambConfig::from(cfg));
  }
  // a zero-initialized head moves this by under 1e-3
  EXPECT_LT(hinge().item(), before - 0.02);
}

TEST(Discriminator, RejectsWrongChunk) {
  RngStream rng(3, "disc");
  const Discriminator d(20, TrainConfig{}, rng);
  EXPECT_THROW(d(Tensor::zeros({31, 20})), DimensionError);
  EXPECT_THROW(d(Tensor::zeros({32, 19})), DimensionError);
}

TEST(Discriminator, ParameterNames) {
  RngStream rng(4, "disc");
  TrainConfig cfg;
  cfg.disc_channels = {8, 8};
  const Discriminator d(4, cfg, rng);
  const auto params = d.parameters();
  ASSERT_FALSE(params.empty());
  EXPECT_EQ(params.front().name.rfind("disc.conv0", 0), 0u);
  EXPECT_EQ(params.back().name.rfind("disc.head", 0), 0u);
}

TEST(Chunking, ChunksLieInsideTheUtterance) {
  RngStream rng(5, "chunk");
  const Tensor mel = rng_normal(rng, {70, 3});
  for (int i = 0; i < 500; ++i) {
    const std::size_t start = sample_chunk_start(70, 32, rng);
    EXPECT_LE(start + 32, 70u);
    const Tensor c = take_chunk(mel, start, 32);
    ASSERT_EQ(c.dim(0), 32u);
    for (std::size_t k = 0; k < 32 * 3; ++k) EXPECT_EQ(c.at(k), mel.at(start * 3 + k));
  }
}

TEST(Chunking, CoversEveryStart) {
  RngStream rng(6, "chunk");
  std::vector<int> seen(6, 0);
  for (int i = 0; i < 600; ++i) ++seen[sample_chunk_start(37, 32, rng)];
  for (int s : seen) EXPECT_GT(s, 50);
}

TEST(Chunking, ShortUtteranceIsPadded) {
  RngStream rng(7, "chunk");
  const Tensor mel = rng_normal(rng, {20, 2});
  EXPECT_EQ(sample_chunk_start(20, 32, rng), 0u);
  const Tensor c = take_chunk(mel, 0, 32);
  ASSERT_EQ(c.dim(0), 32u);
  for (std::size_t k = 0; k < 40; ++k) EXPECT_EQ(c.at(k), mel.at(k));
  for (std::size_t k = 40; k < 64; ++k) EXPECT_EQ(c.at(k), 0.0);
}

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "retts/error.hpp"
#include "retts/gradcheck_suite.hpp"
#include "retts/model.hpp"
#include "retts/ops.hpp"

using namespace retts;

namespace {

ModelConfig small_config() {
  ModelConfig c = gradcheck_toy_config();
  c.d_model = 8;
  c.tokens = 3;
  return c;
}

PhonemeSequence text_of(std::vector<int> ids, std::vector<int> words) { return {std::move(ids), std::move(words)}; }

ReferenceFeature feature(std::size_t frames, std::size_t dim, std::uint64_t seed) {
  RngStream rng(seed, "feature");
  return {rng_normal(rng, {frames, dim})};
}

}  // namespace

TEST(ModelConfig, ValidatesHeads) {
  ModelConfig c = small_config();
  c.n_heads = 3;
  EXPECT_THROW(c.validate(), ContractError);
  c = small_config();
  c.tokens = 0;
  EXPECT_THROW(c.validate(), ContractError);
}

TEST(PhonemeSequence, Invariants) {
  EXPECT_NO_THROW(text_of({1, 2, 3}, {0, 0, 1}).validate(10));
  EXPECT_THROW(text_of({1, 2, 3}, {0, 2, 2}).validate(10), InputError);
  EXPECT_THROW(text_of({1, 2, 3}, {1, 1, 1}).validate(10), InputError);
  EXPECT_THROW(text_of({1, 2, 3}, {0, 1, 0}).validate(10), InputError);
  EXPECT_THROW(text_of({1, 12}, {0, 1}).validate(10), InputError);
  const auto t = text_of({1, 2, 3, 4, 5}, {0, 0, 1, 2, 2});
  EXPECT_EQ(t.word_count(), 3u);
  EXPECT_EQ(t.word_span(1, 2), (std::pair<std::size_t, std::size_t>{2, 5}));
}

TEST(ProsodyContext, MaskedEntriesAreZero) {
  ProsodyTrack track{{2, 3, 1}, {0.5, -1.0, 2.0}, {1.0, 1.5, -0.5}};
  const auto ctx = ProsodyContext::from_track(track, {false, true, false});
  EXPECT_EQ(ctx.duration, (std::vector<double>{2, 0, 1}));
  EXPECT_EQ(ctx.pitch, (std::vector<double>{0.5, 0.0, 2.0}));
  EXPECT_EQ(ctx.energy, (std::vector<double>{1.0, 0.0, -0.5}));
}

TEST(LengthRegulate, Definition) {
  const Tensor h = Tensor::from({2, 2}, {1, 2, 3, 4});
  const std::vector<int> d{2, 3};
  EXPECT_EQ(length_regulate(h, d).to_vector(), (std::vector<double>{1, 2, 1, 2, 3, 4, 3, 4, 3, 4}));
  const std::vector<int> ones{1, 1};
  EXPECT_EQ(length_regulate(h, ones).to_vector(), h.to_vector());
  const std::vector<int> none{0, 0};
  EXPECT_THROW(length_regulate(h, none), ContractError);
  const std::vector<int> negative{1, -1};
  EXPECT_THROW(length_regulate(h, negative), InputError);
}

TEST(LengthRegulate, MatchesNaiveLoopOnRandomInstances) {
  RngStream rng(1, "lr");
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.uniform_int(6), cols = 1 + rng.uniform_int(4);
    std::vector<int> d(n);
    int total = 0;
    for (int& v : d) total += (v = static_cast<int>(rng.uniform_int(4)));
    if (total == 0) d[0] = total = 1;
    const Tensor h = rng_normal(rng, {n, cols});
    EXPECT_EQ(length_regulate(h, d).to_vector(), oracle::length_regulate(h.to_vector(), cols, d));
  }
}

TEST(Durations, Discretization) {
  EXPECT_EQ(discretize_duration(std::log(1.0 + 3.0), 20), 3);
  EXPECT_EQ(discretize_duration(std::log(1.0 + 2.4), 20), 2);
  EXPECT_EQ(discretize_duration(-5.0, 20), 1);
  EXPECT_EQ(discretize_duration(10.0, 20), 20);
}

TEST(Model, ParameterNamesAreUniqueAndStable) {
  const Model a(small_config(), 1), b(small_config(), 1);
  std::set<std::string> names;
  const auto pa = a.parameters(), pb = b.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_TRUE(names.insert(pa[i].name).second) << pa[i].name;
    EXPECT_EQ(pa[i].name, pb[i].name);
    EXPECT_EQ(pa[i].tensor.to_vector(), pb[i].tensor.to_vector());
  }
}

TEST(Model, GlobalEncoderIsDeterministicAndDuplicationInvariant) {
  const Model model(small_config(), 2);
  const auto f = feature(5, small_config().feature_dim, 3);
  const auto s1 = model.encode_global_factors(f);
  EXPECT_EQ(s1.tokens.shape(), (Shape{3, 8}));
  EXPECT_EQ(s1.tokens.to_vector(), model.encode_global_factors(f).tokens.to_vector());

  std::vector<std::size_t> twice;
  for (std::size_t t = 0; t < 5; ++t) twice.insert(twice.end(), {t, t});
  const auto s2 = model.encode_global_factors({gather_rows(f.frames, twice)});
  for (std::size_t i = 0; i < s1.tokens.numel(); ++i) EXPECT_NEAR(s1.tokens.data()[i], s2.tokens.data()[i], 1e-5);
  EXPECT_THROW(model.encode_global_factors({}), ContractError);
}

TEST(Model, StyleTokenReachesEncoder) {
  const Model model(small_config(), 4);
  const auto text = text_of({1, 2, 3}, {0, 0, 1});
  const auto a = model.encode_global_factors(feature(4, small_config().feature_dim, 5));
  const auto b = model.encode_global_factors(feature(4, small_config().feature_dim, 6));
  EXPECT_NE(model.encode_phonemes(text, a).to_vector(), model.encode_phonemes(text, b).to_vector());
  EXPECT_EQ(model.encode_phonemes(text_of({7}, {0}), a).shape(), (Shape{1, 8}));
  EXPECT_THROW(model.encode_phonemes(text_of({1, 99}, {0, 1}), a), InputError);

  // A zero style token is the same as no style at all.
  GlobalFactorTokens zero_style{a.tokens.clone()};
  for (std::size_t c = 0; c < 8; ++c) zero_style.tokens.mutable_data()[c] = 0.0;
  GlobalFactorTokens other_rows = zero_style;
  other_rows.tokens = b.tokens.clone();
  for (std::size_t c = 0; c < 8; ++c) other_rows.tokens.mutable_data()[c] = 0.0;
  EXPECT_EQ(model.encode_phonemes(text, zero_style).to_vector(), model.encode_phonemes(text, other_rows).to_vector());
}

TEST(Model, VarianceAdaptorModes) {
  const Model model(small_config(), 7);
  const auto text = text_of({1, 2, 3}, {0, 1, 2});
  const auto g = model.encode_global_factors(feature(4, small_config().feature_dim, 8));
  const Tensor h = model.encode_phonemes(text, g);
  const ProsodyTrack teacher{{2, 1, 3}, {0.1, 0.2, 0.3}, {-0.1, 0.0, 0.1}};

  const auto train = model.variance_adapt(h, {AdaptMode::Train, nullptr, &teacher, nullptr}, {});
  EXPECT_EQ(train.frames.dim(0), 6u);
  EXPECT_EQ(train.durations, teacher.duration);
  EXPECT_THROW(model.variance_adapt(h, {AdaptMode::Train, nullptr, nullptr, nullptr}, {}), ContractError);
  ProsodyTrack negative = teacher;
  negative.duration[1] = -1;
  EXPECT_THROW(model.variance_adapt(h, {AdaptMode::Train, nullptr, &negative, nullptr}, {}), InputError);

  const auto infer = model.variance_adapt(h, {AdaptMode::Infer, nullptr, nullptr, nullptr}, {});
  long total = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(infer.durations[i], discretize_duration(infer.log_duration.at(i), small_config().max_duration));
    total += infer.durations[i];
  }
  EXPECT_EQ(static_cast<long>(infer.frames.dim(0)), total);

  // Teacher outside the predicted positions, predictions inside.
  const std::vector<bool> predict{false, true, false};
  const auto mixed = model.variance_adapt(h, {AdaptMode::Infer, nullptr, &teacher, &predict}, {});
  EXPECT_EQ(mixed.durations[0], 2);
  EXPECT_EQ(mixed.durations[1], infer.durations[1]);
  EXPECT_EQ(mixed.durations[2], 3);

  // Visible context changes the predictions; fully masked context equals none.
  const auto visible = ProsodyContext::from_track(teacher, {false, false, false});
  const auto hidden = ProsodyContext::from_track(teacher, {true, true, true});
  const auto with_ctx = model.variance_adapt(h, {AdaptMode::Train, &visible, &teacher, nullptr}, {});
  const auto masked = model.variance_adapt(h, {AdaptMode::Train, &hidden, &teacher, nullptr}, {});
  EXPECT_NE(with_ctx.log_duration.to_vector(), train.log_duration.to_vector());
  EXPECT_EQ(masked.log_duration.to_vector(), train.log_duration.to_vector());
}

TEST(Model, DecoderIsInvariantUnderJointTokenPermutation) {
  const Model model(small_config(), 9);
  const auto g = model.encode_global_factors(feature(4, small_config().feature_dim, 10));
  RngStream rng(11, "frames");
  const Tensor frames = rng_normal(rng, {5, 8});
  const Tensor mel = model.decode_mel(frames, g);
  EXPECT_EQ(mel.shape(), (Shape{5, small_config().n_mels}));
  const std::vector<std::size_t> perm{2, 0, 1};
  const Tensor permuted = model.decode_mel(frames, {gather_rows(g.tokens, perm)},
                                           gather_rows(model.params().linking_keys, perm));
  for (std::size_t i = 0; i < mel.numel(); ++i) EXPECT_NEAR(mel.data()[i], permuted.data()[i], 1e-12);
}

TEST(Model, SeveredGlobalPathIgnoresReference) {
  const Model model(small_config(), 12);
  const auto text = text_of({4, 5}, {0, 1});
  const ProsodyTrack teacher{{2, 2}, {0.0, 0.0}, {0.0, 0.0}};
  GlobalFactorTokens zero{Tensor::zeros({3, 8})};
  auto run = [&](const GlobalFactorTokens& g) {
    const auto a = model.variance_adapt(model.encode_phonemes(text, g), {AdaptMode::Train, nullptr, &teacher, nullptr}, {});
    return model.decode_mel(a.frames, g).to_vector();
  };
  const auto base = run(zero);
  GlobalFactorTokens zero2{Tensor::zeros({3, 8})};
  EXPECT_EQ(run(zero2), base);
}

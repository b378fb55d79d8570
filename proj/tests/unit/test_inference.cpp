#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "retts/corpus.hpp"
#include "retts/error.hpp"
#include "retts/gradcheck_suite.hpp"
#include "retts/inference.hpp"

using namespace retts;

namespace {

struct Fixture {
  Corpus corpus;
  Model model;
};

Fixture make_fixture() {
  CorpusSpec spec;
  spec.n_speakers = 2;
  spec.utts_per_speaker = 2;
  spec.seed = 2;
  ModelConfig cfg = gradcheck_toy_config();
  cfg.n_mels = spec.n_mels;
  cfg.phoneme_vocab = spec.phoneme_vocab;
  cfg.feature_dim = spec.feature_dim;
  return {gen_corpus(spec), Model(cfg, 4)};
}

std::vector<int> word_ids(const PhonemeSequence& t, std::size_t w) {
  const auto [lo, hi] = t.word_span(w, w);
  return {t.ids.begin() + static_cast<long>(lo), t.ids.begin() + static_cast<long>(hi)};
}

}  // namespace

TEST(Splice, MatchesNaiveReference) {
  RngStream rng(1, "splice");
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t t0 = 1 + rng.uniform_int(12), cols = 1 + rng.uniform_int(4), ins = rng.uniform_int(6);
    const std::size_t left = rng.uniform_int(t0 + 1);
    const Tensor orig = rng_normal(rng, {t0, cols});
    const Tensor seg = ins ? rng_normal(rng, {ins, cols}) : Tensor();
    const Tensor out = splice(orig, seg, {left, ins, t0 - left});
    EXPECT_EQ(out.to_vector(), oracle::splice(orig.to_vector(), ins ? seg.to_vector() : std::vector<double>{}, cols, left));
  }
}

TEST(Splice, EmptySegmentReturnsOriginal) {
  const Tensor orig = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(splice(orig, Tensor(), {1, 0, 2}).to_vector(), orig.to_vector());
}

TEST(Splice, RejectsInconsistentPlan) {
  const Tensor orig = Tensor::zeros({3, 2});
  EXPECT_THROW(splice(orig, Tensor::zeros({2, 2}), {1, 2, 1}), InputError);
  EXPECT_THROW(splice(orig, Tensor::zeros({2, 2}), {1, 1, 2}), InputError);
  EXPECT_THROW(splice(orig, Tensor::zeros({2, 3}), {1, 2, 2}), InputError);
}

TEST(SplicePlan, FormatParse) {
  const SplicePlan p{12, 7, 30};
  EXPECT_EQ(p.format(), "left 12\ninsert 7\nright 30\n");
  EXPECT_EQ(SplicePlan::parse(p.format()), p);
  EXPECT_THROW(SplicePlan::parse("left 1\ninsert 2\n"), FormatError);
  EXPECT_THROW(SplicePlan::parse("left 1\ninsert 2\nright x\n"), FormatError);
}

TEST(MakeInsertion, BuildsNewText) {
  const PhonemeSequence orig{{1, 2, 3, 4}, {0, 0, 1, 2}};
  const ProsodyTrack pros{{1, 1, 1, 1}, {0, 0, 0, 0}, {0, 0, 0, 0}};
  const auto req = make_insertion(Tensor::zeros({4, 2}), orig, pros, {}, 1, {{7, 8}, {9}});
  EXPECT_EQ(req.new_text.ids, (std::vector<int>{1, 2, 7, 8, 9, 3, 4}));
  EXPECT_EQ(req.new_text.word_index, (std::vector<int>{0, 0, 1, 1, 2, 3, 4}));
  EXPECT_EQ(req.insert_begin, 2u);
  EXPECT_EQ(req.insert_end, 5u);
  EXPECT_NO_THROW(req.validate());
  const auto at_end = make_insertion(Tensor::zeros({4, 2}), orig, pros, {}, 3, {{5}});
  EXPECT_EQ(at_end.insert_begin, 4u);
  EXPECT_THROW(make_insertion(Tensor::zeros({4, 2}), orig, pros, {}, 4, {{5}}), InputError);
  EXPECT_THROW(make_insertion(Tensor::zeros({4, 2}), orig, pros, {}, 1, {{}}), InputError);
}

TEST(InsertionRequest, ValidateCatchesMismatch) {
  const PhonemeSequence orig{{1, 2}, {0, 1}};
  const ProsodyTrack pros{{2, 1}, {0, 0}, {0, 0}};
  auto req = make_insertion(Tensor::zeros({3, 2}), orig, pros, {}, 1, {{5}});
  EXPECT_NO_THROW(req.validate());
  req.original_mel = Tensor::zeros({4, 2});
  EXPECT_THROW(req.validate(), InputError);
  req = make_insertion(Tensor::zeros({3, 2}), orig, pros, {}, 1, {{5}});
  req.new_text.ids[0] = 9;
  EXPECT_THROW(req.validate(), InputError);
}

TEST(InsertWords, ContextIsCopiedAndBoundariesFollowDurations) {
  auto f = make_fixture();
  for (const auto& u : f.corpus.utterances) {
    for (std::size_t w = 0; w < u.text.word_count(); ++w) {
      const auto req = make_insertion(u.mel, u.text, u.prosody, u.reference, w, {word_ids(u.text, w)});
      const auto r = insert_words(f.model, req);
      long left = 0;
      for (std::size_t i = 0; i < req.insert_begin; ++i) left += u.prosody.duration[i];
      EXPECT_EQ(static_cast<long>(r.plan.left_frames), left);
      EXPECT_EQ(static_cast<long>(r.plan.right_frames), u.prosody.total_frames() - left);
      ASSERT_EQ(r.full_mel.dim(0), u.mel.dim(0) + r.plan.insert_frames);
      const auto full = r.full_mel.data();
      const auto orig = u.mel.data();
      const std::size_t cols = u.mel.dim(1);
      for (std::size_t k = 0; k < r.plan.left_frames * cols; ++k) ASSERT_EQ(full[k], orig[k]);
      const std::size_t shift = r.plan.insert_frames * cols;
      for (std::size_t k = r.plan.left_frames * cols; k < orig.size(); ++k) ASSERT_EQ(full[k + shift], orig[k]);
      if (r.plan.insert_frames) {
        for (std::size_t k = 0; k < shift; ++k) ASSERT_EQ(full[r.plan.left_frames * cols + k], r.segment.at(k));
      }
    }
  }
}

TEST(InsertWords, SegmentIsStableUnderRepeat) {
  auto f = make_fixture();
  const auto& u = f.corpus.utterances[1];
  const auto req = make_insertion(u.mel, u.text, u.prosody, u.reference, 1, {{3, 4}});
  const auto a = insert_words(f.model, req);
  const auto b = insert_words(f.model, req);
  EXPECT_EQ(a.plan, b.plan);
  EXPECT_EQ(a.full_mel.to_vector(), b.full_mel.to_vector());
}

TEST(InsertWords, EmptyRangeReturnsOriginal) {
  auto f = make_fixture();
  const auto& u = f.corpus.utterances[0];
  auto req = make_insertion(u.mel, u.text, u.prosody, u.reference, 1, {});
  const auto r = insert_words(f.model, req);
  EXPECT_EQ(r.plan.insert_frames, 0u);
  EXPECT_FALSE(r.segment.defined());
  EXPECT_EQ(r.full_mel.to_vector(), u.mel.to_vector());
}

TEST(GenerateFull, ShapeAndErrors) {
  auto f = make_fixture();
  const auto& u = f.corpus.utterances[0];
  const Tensor mel = generate_full(f.model, u.text, u.reference);
  EXPECT_EQ(mel.dim(1), f.model.config().n_mels);
  EXPECT_GE(mel.dim(0), u.text.size());
  EXPECT_THROW(generate_full(f.model, PhonemeSequence{}, u.reference), InputError);
  for (double v : mel.data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(SpeakerSimilarity, CountsTriples) {
  auto f = make_fixture();
  const auto s = speaker_similarity(f.model, f.corpus);
  // 4 utterances, 2 per speaker: each anchor has 1 same-speaker partner and 2 others
  EXPECT_EQ(s.triples, 8u);
  EXPECT_GE(s.separated_fraction, 0.0);
  EXPECT_LE(s.separated_fraction, 1.0);
  EXPECT_LE(s.within_mean, 1.0 + 1e-12);
}

#include <gtest/gtest.h>

#include <set>

#include "retts/corpus.hpp"
#include "retts/error.hpp"
#include "retts/matrix_io.hpp"
#include "tempdir.hpp"

using namespace retts;
using retts::testing::TempDir;

namespace {

CorpusSpec small_spec() {
  CorpusSpec s;
  s.n_speakers = 2;
  s.utts_per_speaker = 3;
  s.seed = 5;
  return s;
}

void expect_same(const Utterance& a, const Utterance& b) {
  EXPECT_EQ(a.id, b.id);
  EXPECT_EQ(a.speaker, b.speaker);
  EXPECT_EQ(a.text.ids, b.text.ids);
  EXPECT_EQ(a.text.word_index, b.text.word_index);
  EXPECT_EQ(a.prosody.duration, b.prosody.duration);
  EXPECT_EQ(a.prosody.pitch, b.prosody.pitch);
  EXPECT_EQ(a.prosody.energy, b.prosody.energy);
  EXPECT_EQ(a.frames.pitch, b.frames.pitch);
  EXPECT_EQ(a.mel.shape(), b.mel.shape());
  EXPECT_EQ(a.mel.to_vector(), b.mel.to_vector());
  EXPECT_EQ(a.reference.frames.to_vector(), b.reference.frames.to_vector());
}

}  // namespace

TEST(Corpus, Deterministic) {
  const Corpus a = gen_corpus(small_spec());
  const Corpus b = gen_corpus(small_spec());
  ASSERT_EQ(a.utterances.size(), 6u);
  for (std::size_t i = 0; i < a.utterances.size(); ++i) expect_same(a.utterances[i], b.utterances[i]);
}

TEST(Corpus, SeedChangesData) {
  CorpusSpec s = small_spec();
  s.seed = 6;
  EXPECT_NE(gen_corpus(small_spec()).utterances[0].mel.to_vector(), gen_corpus(s).utterances[0].mel.to_vector());
}

TEST(Corpus, UtteranceInvariants) {
  const Corpus c = gen_corpus(small_spec());
  std::set<std::string> ids;
  for (const auto& u : c.utterances) {
    EXPECT_TRUE(ids.insert(u.id).second);
    EXPECT_NO_THROW(u.text.validate(c.spec.phoneme_vocab));
    EXPECT_GE(u.text.word_count(), c.spec.min_words);
    EXPECT_LE(u.text.word_count(), c.spec.max_words);
    ASSERT_EQ(u.prosody.size(), u.text.size());
    for (int d : u.prosody.duration) EXPECT_GE(d, 1);
    EXPECT_EQ(u.prosody.total_frames(), static_cast<long>(u.mel.dim(0)));
    EXPECT_EQ(u.mel.dim(1), c.spec.n_mels);
    EXPECT_EQ(u.frames.pitch.size(), u.mel.dim(0));
    EXPECT_EQ(u.reference.frames.dim(0), (u.mel.dim(0) + 1) / 2);
    EXPECT_EQ(u.reference.frames.dim(1), c.spec.feature_dim);
  }
}

TEST(Corpus, FramePitchFollowsPhonemes) {
  const Corpus c = gen_corpus(small_spec());
  const auto& u = c.utterances[0];
  std::size_t f = 0;
  for (std::size_t i = 0; i < u.prosody.size(); ++i) {
    for (int k = 0; k < u.prosody.duration[i]; ++k, ++f) {
      EXPECT_EQ(u.frames.pitch[f], u.prosody.pitch[i]);
      EXPECT_EQ(u.frames.energy[f], u.prosody.energy[i]);
    }
  }
}

TEST(Corpus, SpeakersDiffer) {
  const Corpus c = gen_corpus(small_spec());
  EXPECT_NE(c.speakers[0].timbre, c.speakers[1].timbre);
  EXPECT_NE(c.speakers[0].feature_basis, c.speakers[1].feature_basis);
  // a speaker does not depend on how many others exist
  CorpusSpec more = small_spec();
  more.n_speakers = 3;
  EXPECT_EQ(make_speaker(more, 1).timbre, c.speakers[1].timbre);
}

TEST(Corpus, WriteReadRoundTrip) {
  TempDir dir("corpus");
  const Corpus c = gen_corpus(small_spec());
  write_corpus(c, dir.path());
  const Corpus back = read_corpus(dir.path());
  EXPECT_EQ(back.spec.seed, c.spec.seed);
  ASSERT_EQ(back.utterances.size(), c.utterances.size());
  for (std::size_t i = 0; i < c.utterances.size(); ++i) expect_same(back.utterances[i], c.utterances[i]);
  expect_same(read_utterance(dir / ("utts/" + c.utterances[2].id + ".mel")), c.utterances[2]);
}

TEST(Corpus, WritesAreByteIdentical) {
  TempDir a("corpus_a"), b("corpus_b");
  write_corpus(gen_corpus(small_spec()), a.path());
  write_corpus(gen_corpus(small_spec()), b.path());
  for (const char* name : {"manifest.tsv", "speakers.tsv", "corpus.cfg"}) {
    EXPECT_EQ(read_file_bytes(a / name), read_file_bytes(b / name)) << name;
  }
  EXPECT_EQ(read_file_bytes(a / "utts/s01_u002.mel"), read_file_bytes(b / "utts/s01_u002.mel"));
}

TEST(Corpus, MissingDirectory) {
  TempDir dir("corpus");
  EXPECT_THROW(read_corpus(dir / "nope"), Error);
}

TEST(Phonemes, FormatParse) {
  const PhonemeSequence t{{3, 4, 7, 1, 2}, {0, 0, 1, 2, 2}};
  EXPECT_EQ(format_phonemes(t), "3,4 7 1,2");
  const auto back = parse_phonemes("3,4 7\t1,2\n");
  EXPECT_EQ(back.ids, t.ids);
  EXPECT_EQ(back.word_index, t.word_index);
  EXPECT_THROW(parse_phonemes("3,,4"), InputError);
  EXPECT_THROW(parse_phonemes("a b"), InputError);
  EXPECT_THROW(parse_phonemes("  "), InputError);
}

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "retts/alignment.hpp"
#include "retts/model.hpp"
#include "retts/tensor.hpp"

namespace retts {

/// Shape of a synthetic corpus. Everything else is derived from the seed.
struct CorpusSpec {
  std::size_t n_speakers = 4;
  std::size_t utts_per_speaker = 16;
  std::uint64_t seed = 1;
  std::size_t n_mels = 20;
  std::size_t phoneme_vocab = 40;
  std::size_t feature_dim = 32;
  std::size_t min_words = 3;
  std::size_t max_words = 8;
  std::size_t max_word_phonemes = 4;
};

struct SyntheticSpeaker {
  std::size_t id = 0;
  double base_pitch = 0.0;
  double tempo = 1.0;  // duration multiplier
  double base_energy = 0.0;
  std::vector<double> timbre;         // [n_mels]
  std::vector<double> feature_basis;  // [feature_dim]
};

struct Utterance {
  std::string id;
  std::size_t speaker = 0;
  PhonemeSequence text;
  ProsodyTrack prosody;       // oracle durations, pitch and energy per phoneme
  FrameProsody frames;        // pitch and energy per frame
  Tensor mel;                 // [T, n_mels], T == prosody.total_frames()
  ReferenceFeature reference; // [ceil(T / 2), feature_dim]
};

struct Corpus {
  CorpusSpec spec;
  std::vector<SyntheticSpeaker> speakers;
  std::vector<Utterance> utterances;

  const SyntheticSpeaker& speaker_of(const Utterance& u) const { return speakers.at(u.speaker); }
};

/// Phone-level constants of the synthetic world shared by every speaker.
struct SyntheticWorld {
  std::vector<std::vector<double>> templates;  // [vocab][n_mels] spectral shape per phone
  std::vector<double> base_duration;           // frames per phone, 2..6
  std::vector<double> pitch_offset;
  std::vector<double> energy_offset;
  std::vector<double> pitch_profile;           // [n_mels] how pitch tilts the spectrum
  std::vector<std::vector<double>> content;    // [vocab][feature_dim] phone signature in features

  static SyntheticWorld create(const CorpusSpec& spec);
};

SyntheticSpeaker make_speaker(const CorpusSpec& spec, std::size_t id);

/// Generates the utterance fully determined by (seed, speaker, index).
Utterance make_utterance(const CorpusSpec& spec, const SyntheticWorld& world,
                         const SyntheticSpeaker& speaker, std::size_t index);

/// Renders mel and reference feature for a given phoneme sequence and prosody.
/// `noise_stream` names the stream for the additive noise.
Tensor render_mel(const SyntheticWorld& world, const SyntheticSpeaker& speaker,
                  const PhonemeSequence& text, const ProsodyTrack& prosody,
                  std::uint64_t seed, const std::string& noise_stream);
ReferenceFeature render_reference(const SyntheticWorld& world, const SyntheticSpeaker& speaker,
                                  const PhonemeSequence& text, const ProsodyTrack& prosody,
                                  std::uint64_t seed, const std::string& noise_stream);

Corpus gen_corpus(const CorpusSpec& spec);

/// Layout: manifest.tsv, speakers.tsv, corpus.cfg and utts/<id>.{mel,feat,prosody,frames,phon}.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus read_corpus(const std::filesystem::path& dir);

/// Per-utterance files found next to a .mel path by stem.
Utterance read_utterance(const std::filesystem::path& mel_path);

std::string format_phonemes(const PhonemeSequence& text);
PhonemeSequence parse_phonemes(const std::string& text);

}  // namespace retts

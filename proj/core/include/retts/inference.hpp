#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "retts/corpus.hpp"
#include "retts/model.hpp"
#include "retts/tensor.hpp"

namespace retts {

/// Zero-shot synthesis: global tokens from `reference`, predicted prosody,
/// no prosody context. Throws InputError on empty text.
Tensor generate_full(const Model& model, const PhonemeSequence& text, const ReferenceFeature& reference);

struct InsertionRequest {
  Tensor original_mel;  // [T0, n_mels]
  PhonemeSequence original_text;
  ProsodyTrack original_prosody;
  PhonemeSequence new_text;
  std::size_t insert_begin = 0;  // [begin, end) phonemes of new_text that are new
  std::size_t insert_end = 0;
  ReferenceFeature reference;    // source of the global tokens

  /// Throws InputError unless removing the range from new_text gives
  /// original_text and the prosody and mel agree with it.
  void validate() const;
};

struct SplicePlan {
  std::size_t left_frames = 0;
  std::size_t insert_frames = 0;
  std::size_t right_frames = 0;

  bool operator==(const SplicePlan&) const = default;
  /// "left N\ninsert N\nright N\n".
  std::string format() const;
  static SplicePlan parse(const std::string& text);
};

struct InsertionResult {
  Tensor segment;  // [insert_frames, n_mels]; undefined when insert_frames == 0
  SplicePlan plan;
  Tensor full_mel;
};

/// Builds a request that inserts `words` (phoneme ids per word) so that the
/// first of them becomes word `at_word` of the new sentence.
InsertionRequest make_insertion(const Tensor& original_mel, const PhonemeSequence& original_text,
                                const ProsodyTrack& original_prosody, const ReferenceFeature& reference,
                                std::size_t at_word, const std::vector<std::vector<int>>& words);

/// Generates the new sentence with original prosody outside the range and
/// predicted prosody inside it, then splices the range's frames into the
/// original mel.
InsertionResult insert_words(const Model& model, const InsertionRequest& request);

/// original[0, left) ++ segment ++ original[left, T0). Rows are copied, never
/// recomputed. Throws InputError if the plan does not match the shapes.
Tensor splice(const Tensor& original, const Tensor& segment, const SplicePlan& plan);

/// Mean over the token axis of the global tokens for a reference.
std::vector<double> pooled_global_tokens(const Model& model, const ReferenceFeature& reference);

struct SpeakerSimilarity {
  double within_mean = 0.0;  // mean cosine over same-speaker pairs
  double across_mean = 0.0;  // mean cosine over different-speaker pairs
  /// Fraction of (anchor, same-speaker b, other-speaker c) triples with
  /// cos(anchor, b) > cos(anchor, c).
  double separated_fraction = 0.0;
  std::size_t triples = 0;
};

/// Cosine similarities of pooled global tokens across a corpus.
SpeakerSimilarity speaker_similarity(const Model& model, const Corpus& corpus);

}  // namespace retts

#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "retts/layers.hpp"
#include "retts/tensor.hpp"

namespace retts {

/// Learned maps of the online aligner. Phonemes get their own embedding
/// table so the alignment objective never pulls on the encoder's embeddings.
struct AlignerParams {
  Tensor text_embedding;  // [vocab, align_dim]
  Linear text_projection; // align_dim -> align_dim
  Linear mel_projection;  // n_mels -> align_dim

  static AlignerParams init(std::size_t vocab, std::size_t n_mels, std::size_t align_dim,
                            RngStream& rng);
  void collect(const std::string& prefix, ParamList& out) const;
};

/// Soft frame-to-phoneme alignment; row t is a distribution over phonemes.
struct AlignmentMatrix {
  Tensor log_probs;  // [T, N]

  std::size_t frames() const { return log_probs.dim(0); }
  std::size_t phonemes() const { return log_probs.dim(1); }
  /// Probabilities, exp(log_probs), detached.
  std::vector<double> probabilities() const;
};

struct FrameProsody {
  std::vector<double> pitch;
  std::vector<double> energy;
};

/// A[t, :] = softmax_j(-||mel_projection(mel_t) - text_projection(phon_j)||^2).
/// phoneme_embedding is [N, align_dim]. Requires T >= N >= 1.
AlignmentMatrix soft_alignment(const Tensor& mel, const Tensor& phoneme_embedding,
                               const AlignerParams& params);

/// Negative log of the summed probability of every monotonic path that
/// starts on the first phoneme, ends on the last, and visits each phoneme at
/// least once. Differentiable with respect to log_probs.
Tensor forward_sum_loss(const Tensor& log_probs);

/// Segment lengths of the most likely monotonic path. Among equally likely
/// paths the one that advances to the next phoneme earliest is returned.
std::vector<int> extract_durations(const Tensor& log_probs);

/// Means of frame-level pitch and energy over each phoneme's span. A
/// zero-length span yields 0.
std::pair<std::vector<double>, std::vector<double>> pool_phoneme_prosody(
    const FrameProsody& frames, std::span<const int> durations);

}  // namespace retts

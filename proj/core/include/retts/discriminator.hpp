#pragma once

#include <cstddef>
#include <vector>

#include "retts/layers.hpp"
#include "retts/rng.hpp"
#include "retts/tensor.hpp"
#include "retts/train_config.hpp"

namespace retts {

struct DiscriminatorOutput {
  Tensor score;                  // scalar
  std::vector<Tensor> features;  // one per strided conv layer
};

/// Critic over fixed-length mel chunks: strided convolutions with leaky ReLU
/// followed by a linear head on the flattened last feature map.
class Discriminator {
 public:
  Discriminator(std::size_t n_mels, const TrainConfig& cfg, RngStream& rng);

  std::size_t chunk_frames() const { return chunk_; }
  DiscriminatorOutput operator()(const Tensor& chunk) const;
  ParamList parameters() const;

 private:
  std::size_t n_mels_;
  std::size_t chunk_;
  double slope_;
  std::vector<Conv1dParams> layers_;
  Linear head_;
};

/// Start frame of a uniformly placed chunk; 0 when the utterance is shorter
/// than the chunk.
std::size_t sample_chunk_start(std::size_t frames, std::size_t chunk, RngStream& rng);

/// Rows [start, start + chunk) of mel, zero padded at the end if the
/// utterance is too short. Differentiable.
Tensor take_chunk(const Tensor& mel, std::size_t start, std::size_t chunk);

}  // namespace retts

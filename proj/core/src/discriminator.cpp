#include "retts/discriminator.hpp"

#include "retts/error.hpp"
#include "retts/ops.hpp"

namespace retts {

Discriminator::Discriminator(std::size_t n_mels, const TrainConfig& cfg, RngStream& rng)
    : n_mels_(n_mels), chunk_(cfg.disc_chunk), slope_(cfg.disc_slope) {
  std::size_t in = n_mels;
  std::size_t frames = chunk_;
  const std::size_t pad = cfg.disc_kernel / 2;
  for (std::size_t out : cfg.disc_channels) {
    layers_.push_back(Conv1dParams::init(cfg.disc_kernel, in, out, rng, cfg.disc_stride, pad));
    if (frames + 2 * pad < cfg.disc_kernel) throw ContractError("discriminator: chunk too short for depth");
    frames = (frames + 2 * pad - cfg.disc_kernel) / cfg.disc_stride + 1;
    in = out;
  }
  // not zero: LAMB steps scale with ||w||, so a zero head never leaves zero
  head_ = Linear::init(frames * in, 1, rng);
}

DiscriminatorOutput Discriminator::operator()(const Tensor& chunk) const {
  if (chunk.rank() != 2 || chunk.dim(0) != chunk_ || chunk.dim(1) != n_mels_) {
    throw DimensionError("discriminator expects [" + std::to_string(chunk_) + "x" +
                         std::to_string(n_mels_) + "], got " + shape_str(chunk.shape()));
  }
  DiscriminatorOutput out;
  Tensor h = chunk;
  for (const auto& layer : layers_) {
    h = leaky_relu(layer(h), slope_);
    out.features.push_back(h);
  }
  out.score = reshape(head_(reshape(h, {1, h.numel()})), {});
  return out;
}

ParamList Discriminator::parameters() const {
  ParamList out;
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].collect("disc.conv" + std::to_string(i), out);
  head_.collect("disc.head", out);
  return out;
}

std::size_t sample_chunk_start(std::size_t frames, std::size_t chunk, RngStream& rng) {
  const double u = rng.uniform();
  if (frames <= chunk) return 0;
  const std::size_t positions = frames - chunk + 1;
  return std::min(static_cast<std::size_t>(u * static_cast<double>(positions)), positions - 1);
}

Tensor take_chunk(const Tensor& mel, std::size_t start, std::size_t chunk) {
  const std::size_t frames = mel.dim(0);
  if (start >= frames) throw ContractError("take_chunk: start past the end");
  const std::size_t end = std::min(frames, start + chunk);
  Tensor part = slice_rows(mel, start, end);
  if (end - start == chunk) return part;
  return concat_rows({part, Tensor::zeros({chunk - (end - start), mel.dim(1)})});
}

}  // namespace retts

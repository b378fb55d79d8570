#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace retts {

enum class DurationSource { Aligner, Oracle };

/// Optimization constants for both training stages. Defaults follow the
/// full-scale recipe except batch_size, which is desk scale.
struct TrainConfig {
  std::size_t batch_size = 8;  // full-scale runs use 256
  double weight_decay = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double lamb_eps = 1e-8;
  double trust_clip = 10.0;
  double grad_clip = 1.0;

  double stage1_lr = 0.1;
  double stage1_power = 0.5;
  std::uint64_t stage1_warmup = 1000;
  std::uint64_t stage1_total = 80000;

  double stage2_lr_model = 1e-4;
  double stage2_lr_disc = 5e-5;
  std::uint64_t stage2_steps = 20000;

  double alpha_duration = 0.1;
  double alpha_pitch = 0.1;
  double alpha_energy = 0.1;
  double alpha_align = 1.0;
  double lambda_feat = 10.0;

  double mask_probability = 0.5;
  std::size_t mask_span_min = 1;
  std::size_t mask_span_max = 3;

  std::size_t disc_chunk = 32;
  std::vector<std::size_t> disc_channels{64, 128, 256, 256};
  std::size_t disc_kernel = 5;
  std::size_t disc_stride = 2;
  double disc_slope = 0.2;

  DurationSource duration_source = DurationSource::Aligner;
  std::uint64_t checkpoint_every = 0;  // 0: only the final checkpoint

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

std::string to_string(DurationSource source);
DurationSource duration_source_from_string(const std::string& text);

}  // namespace retts

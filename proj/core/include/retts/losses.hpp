#pragma once

#include <cstddef>
#include <vector>

#include "retts/model.hpp"
#include "retts/rng.hpp"
#include "retts/tensor.hpp"
#include "retts/train_config.hpp"

namespace retts {

/// Scalar parts of the reconstruction-stage objective.
struct Stage1LossBreakdown {
  double mel_mse = 0.0;
  double dur_mse = 0.0;
  double pitch_mse = 0.0;
  double energy_mse = 0.0;
  double align_loss = 0.0;
  double total = 0.0;

  /// mel + a1 dur + a2 pitch + a3 energy + a4 align, evaluated left to right.
  static double compose(double mel, double dur, double pitch, double energy, double align,
                        const TrainConfig& cfg);
};

struct Stage1Prediction {
  Tensor mel;           // [T, n_mels]
  Tensor log_duration;  // [N]
  Tensor pitch;         // [N]
  Tensor energy;        // [N]
};

struct Stage1Target {
  Tensor mel;
  std::vector<int> duration;
  std::vector<double> pitch;
  std::vector<double> energy;
};

struct Stage1Loss {
  Tensor total;
  Stage1LossBreakdown parts;
};

/// Mel MSE plus weighted duration (in log(1 + d)), pitch and energy MSEs plus
/// the weighted alignment loss. `log_probs` may be null, in which case the
/// alignment term is zero.
Stage1Loss stage1_loss(const Stage1Prediction& pred, const Stage1Target& target,
                       const Tensor* log_probs, const TrainConfig& cfg);

/// max(0, 1 - real) + max(0, 1 + fake).
Tensor hinge_d_loss(const Tensor& real_score, const Tensor& fake_score);
double hinge_d_loss(double real_score, double fake_score);

/// (1/N) sum_l (1/d_l) ||real_l - fake_l||_1 over N layers, d_l = numel.
Tensor feature_matching_loss(const std::vector<Tensor>& real_features,
                             const std::vector<Tensor>& fake_features);

Tensor stage2_loss(const Tensor& stage1_total, const Tensor& feature_loss, double lambda);
double stage2_loss(double stage1_total, double feature_loss, double lambda);

/// Prosody smoothing: which words have their context hidden.
struct MaskSpec {
  bool apply = false;
  std::size_t first_word = 0;
  std::size_t last_word = 0;  // inclusive
  std::vector<bool> phoneme_mask;
};

MaskSpec sample_prosody_mask(const PhonemeSequence& text, RngStream& rng, const TrainConfig& cfg);

}  // namespace retts

#include "retts/losses.hpp"

#include <algorithm>
#include <cmath>

#include "retts/alignment.hpp"
#include "retts/error.hpp"
#include "retts/ops.hpp"

namespace retts {

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ContractError(std::string("train config: ") + name + " must be positive");
  };
  positive(static_cast<double>(batch_size), "batch_size");
  positive(beta1, "beta1");
  positive(beta2, "beta2");
  positive(lamb_eps, "lamb_eps");
  positive(trust_clip, "trust_clip");
  positive(grad_clip, "grad_clip");
  positive(stage1_lr, "stage1_lr");
  positive(stage1_power, "stage1_power");
  positive(static_cast<double>(stage1_total), "stage1_total");
  positive(stage2_lr_model, "stage2_lr_model");
  positive(stage2_lr_disc, "stage2_lr_disc");
  positive(static_cast<double>(disc_chunk), "disc_chunk");
  positive(static_cast<double>(disc_kernel), "disc_kernel");
  positive(static_cast<double>(disc_stride), "disc_stride");
  if (weight_decay < 0.0) throw ContractError("train config: weight_decay must be >= 0");
  if (beta1 >= 1.0 || beta2 >= 1.0) throw ContractError("train config: betas must be < 1");
  if (stage1_warmup >= stage1_total) throw ContractError("train config: warmup must end before total");
  if (mask_probability < 0.0 || mask_probability > 1.0) {
    throw ContractError("train config: mask_probability must be in [0, 1]");
  }
  if (mask_span_min == 0 || mask_span_min > mask_span_max) {
    throw ContractError("train config: mask span bounds invalid");
  }
  if (disc_channels.empty()) throw ContractError("train config: discriminator needs layers");
  for (double a : {alpha_duration, alpha_pitch, alpha_energy, alpha_align, lambda_feat}) {
    if (a < 0.0) throw ContractError("train config: loss weights must be >= 0");
  }
}

std::string to_string(DurationSource source) {
  return source == DurationSource::Aligner ? "aligner" : "oracle";
}

DurationSource duration_source_from_string(const std::string& text) {
  if (text == "aligner") return DurationSource::Aligner;
  if (text == "oracle") return DurationSource::Oracle;
  throw InputError("duration_source must be 'aligner' or 'oracle', got '" + text + "'");
}

double Stage1LossBreakdown::compose(double mel, double dur, double pitch, double energy, double align,
                                    const TrainConfig& cfg) {
  return mel + cfg.alpha_duration * dur + cfg.alpha_pitch * pitch + cfg.alpha_energy * energy +
         cfg.alpha_align * align;
}

Stage1Loss stage1_loss(const Stage1Prediction& pred, const Stage1Target& target,
                       const Tensor* log_probs, const TrainConfig& cfg) {
  if (pred.mel.shape() != target.mel.shape()) {
    throw InputError("stage1_loss: predicted mel " + shape_str(pred.mel.shape()) + " vs target " +
                     shape_str(target.mel.shape()));
  }
  const std::size_t n = target.duration.size();
  if (pred.log_duration.numel() != n || pred.pitch.numel() != n || pred.energy.numel() != n ||
      target.pitch.size() != n || target.energy.size() != n) {
    throw InputError("stage1_loss: phoneme-level lengths disagree");
  }
  std::vector<double> log_dur(n);
  for (std::size_t i = 0; i < n; ++i) log_dur[i] = std::log1p(static_cast<double>(target.duration[i]));
  const Shape vec{n};

  Tensor mel = mse_loss(pred.mel, target.mel);
  Tensor dur = mse_loss(reshape(pred.log_duration, vec), Tensor::from(vec, std::move(log_dur)));
  Tensor pitch = mse_loss(reshape(pred.pitch, vec), Tensor::from(vec, target.pitch));
  Tensor energy = mse_loss(reshape(pred.energy, vec), Tensor::from(vec, target.energy));
  Tensor align = log_probs ? forward_sum_loss(*log_probs) : Tensor::scalar(0.0);

  Tensor total = add(add(add(add(mel, scale(dur, cfg.alpha_duration)), scale(pitch, cfg.alpha_pitch)),
                         scale(energy, cfg.alpha_energy)),
                     scale(align, cfg.alpha_align));

  Stage1Loss out;
  out.parts.mel_mse = mel.item();
  out.parts.dur_mse = dur.item();
  out.parts.pitch_mse = pitch.item();
  out.parts.energy_mse = energy.item();
  out.parts.align_loss = align.item();
  out.parts.total = Stage1LossBreakdown::compose(out.parts.mel_mse, out.parts.dur_mse, out.parts.pitch_mse,
                                                 out.parts.energy_mse, out.parts.align_loss, cfg);
  out.total = std::move(total);
  return out;
}

Tensor hinge_d_loss(const Tensor& real_score, const Tensor& fake_score) {
  return add(relu(add_scalar(neg(real_score), 1.0)), relu(add_scalar(fake_score, 1.0)));
}

double hinge_d_loss(double real_score, double fake_score) {
  return std::max(0.0, 1.0 - real_score) + std::max(0.0, 1.0 + fake_score);
}

Tensor feature_matching_loss(const std::vector<Tensor>& real_features,
                             const std::vector<Tensor>& fake_features) {
  if (real_features.size() != fake_features.size() || real_features.empty()) {
    throw InputError("feature_matching_loss: layer lists differ in length or are empty");
  }
  Tensor total;
  for (std::size_t l = 0; l < real_features.size(); ++l) {
    if (real_features[l].shape() != fake_features[l].shape()) {
      throw InputError("feature_matching_loss: layer " + std::to_string(l) + " shapes differ");
    }
    Tensor layer = l1_loss(fake_features[l], real_features[l]);
    total = total.defined() ? add(total, layer) : layer;
  }
  return scale(total, 1.0 / static_cast<double>(real_features.size()));
}

Tensor stage2_loss(const Tensor& stage1_total, const Tensor& feature_loss, double lambda) {
  return add(stage1_total, scale(feature_loss, lambda));
}

double stage2_loss(double stage1_total, double feature_loss, double lambda) {
  return stage1_total + lambda * feature_loss;
}

MaskSpec sample_prosody_mask(const PhonemeSequence& text, RngStream& rng, const TrainConfig& cfg) {
  const std::size_t words = text.word_count();
  if (words == 0) throw InputError("sample_prosody_mask: text has no words");
  MaskSpec spec;
  spec.phoneme_mask.assign(text.size(), false);
  // Both draws are always consumed so the stream position does not depend
  // on the outcome.
  const bool apply = rng.uniform() < cfg.mask_probability;
  const std::size_t span_choices = cfg.mask_span_max - cfg.mask_span_min + 1;
  const std::size_t drawn_span = cfg.mask_span_min + rng.uniform_int(span_choices);
  const double start_u = rng.uniform();
  if (!apply) return spec;
  const std::size_t span = std::min(drawn_span, words);
  const std::size_t positions = words - span + 1;
  const std::size_t first = std::min(static_cast<std::size_t>(start_u * static_cast<double>(positions)),
                                     positions - 1);
  spec.apply = true;
  spec.first_word = first;
  spec.last_word = first + span - 1;
  const auto [lo, hi] = text.word_span(spec.first_word, spec.last_word);
  for (std::size_t i = lo; i < hi; ++i) spec.phoneme_mask[i] = true;
  return spec;
}

}  // namespace retts

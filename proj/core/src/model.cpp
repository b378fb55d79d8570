#include "retts/model.hpp"

#include <algorithm>
#include <cmath>

#include "retts/error.hpp"
#include "retts/ops.hpp"

namespace retts {

void ModelConfig::validate() const {
  const std::size_t extents[] = {tokens,       encoder_layers, decoder_layers, gfe_layers,
                                 d_model,      ffn_hidden,     gfe_channels,   gfe_ffn_hidden,
                                 n_heads,      n_mels,         phoneme_vocab,  max_duration,
                                 feature_dim,  predictor_channels, align_dim};
  for (std::size_t e : extents) {
    if (e == 0) throw ContractError("model config: every extent must be positive");
  }
  if (d_model % n_heads != 0) throw ContractError("model config: d_model not divisible by n_heads");
  if (gfe_channels % n_heads != 0) {
    throw ContractError("model config: gfe_channels not divisible by n_heads");
  }
  if (predictor_dropout < 0.0 || predictor_dropout >= 1.0) {
    throw ContractError("model config: predictor_dropout must be in [0, 1)");
  }
}

Tensor GlobalFactorTokens::style_token() const { return slice_rows(tokens, 0, 1); }

std::size_t PhonemeSequence::word_count() const {
  return word_index.empty() ? 0 : static_cast<std::size_t>(word_index.back()) + 1;
}

std::pair<std::size_t, std::size_t> PhonemeSequence::word_span(std::size_t first_word,
                                                               std::size_t last_word) const {
  if (first_word > last_word || last_word >= word_count()) {
    throw InputError("word span out of range");
  }
  const auto lo = std::lower_bound(word_index.begin(), word_index.end(), static_cast<int>(first_word));
  const auto hi = std::upper_bound(word_index.begin(), word_index.end(), static_cast<int>(last_word));
  return {static_cast<std::size_t>(lo - word_index.begin()),
          static_cast<std::size_t>(hi - word_index.begin())};
}

void PhonemeSequence::validate(std::size_t vocab) const {
  if (ids.empty()) throw InputError("phoneme sequence is empty");
  if (ids.size() != word_index.size()) throw InputError("phoneme ids and word index differ in length");
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw InputError("phoneme id " + std::to_string(id) + " outside vocabulary of " +
                       std::to_string(vocab));
    }
  }
  if (word_index.front() != 0) throw InputError("word index must start at 0");
  for (std::size_t i = 1; i < word_index.size(); ++i) {
    const int step = word_index[i] - word_index[i - 1];
    if (step != 0 && step != 1) throw InputError("word index must be non-decreasing without gaps");
  }
}

long ProsodyTrack::total_frames() const {
  long total = 0;
  for (int d : duration) total += d;
  return total;
}

ProsodyContext ProsodyContext::from_track(const ProsodyTrack& track, std::vector<bool> mask) {
  if (mask.size() != track.size() || track.pitch.size() != track.size() ||
      track.energy.size() != track.size()) {
    throw InputError("prosody context: track and mask lengths differ");
  }
  ProsodyContext ctx;
  ctx.duration.resize(track.size());
  ctx.pitch.resize(track.size());
  ctx.energy.resize(track.size());
  for (std::size_t i = 0; i < track.size(); ++i) {
    const bool hidden = mask[i];
    ctx.duration[i] = hidden ? 0.0 : static_cast<double>(track.duration[i]);
    ctx.pitch[i] = hidden ? 0.0 : track.pitch[i];
    ctx.energy[i] = hidden ? 0.0 : track.energy[i];
  }
  ctx.mask = std::move(mask);
  return ctx;
}

Tensor length_regulate(const Tensor& H, std::span<const int> durations) {
  if (H.rank() != 2 || H.dim(0) != durations.size()) {
    throw DimensionError("length_regulate: " + std::to_string(durations.size()) +
                         " durations for encoded sequence " + shape_str(H.shape()));
  }
  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < durations.size(); ++i) {
    if (durations[i] < 0) throw InputError("length_regulate: negative duration");
    index.insert(index.end(), static_cast<std::size_t>(durations[i]), i);
  }
  if (index.empty()) throw ContractError("length_regulate: durations sum to zero");
  return gather_rows(H, index);
}

int discretize_duration(double log_duration, std::size_t max_duration) {
  const double frames = std::round(std::exp(log_duration) - 1.0);
  const double clamped = std::clamp(frames, 1.0, static_cast<double>(max_duration));
  return static_cast<int>(clamped);
}

Model::Model(ModelConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  RngStream rng(seed, "init");
  const auto& c = config_;
  params_.prototypes = rng_normal(rng, {c.tokens, c.gfe_channels}).set_requires_grad(true);
  for (std::size_t i = 0; i < c.gfe_layers; ++i) {
    params_.gfe.push_back(CrossAttentionModuleParams::init(c.tokens, c.gfe_channels, c.feature_dim,
                                                           c.gfe_ffn_hidden, c.n_heads, rng));
  }
  params_.gfe_projection = Linear::init(c.gfe_channels, c.d_model, rng);
  params_.linking_keys = rng_normal(rng, {c.tokens, c.d_model}).set_requires_grad(true);
  params_.phoneme_embedding =
      rng_normal(rng, {c.phoneme_vocab, c.d_model}).set_requires_grad(true);
  for (std::size_t i = 0; i < c.encoder_layers; ++i) {
    params_.encoder.push_back(FFTBlockParams::init(c.d_model, c.n_heads, c.ffn_hidden, rng));
  }
  auto& a = params_.adaptor;
  a.duration = VariancePredictorParams::init(c.d_model, c.predictor_channels, c.predictor_dropout, rng);
  a.pitch = VariancePredictorParams::init(c.d_model, c.predictor_channels, c.predictor_dropout, rng);
  a.energy = VariancePredictorParams::init(c.d_model, c.predictor_channels, c.predictor_dropout, rng);
  a.pitch_embedding = Conv1dParams::init(3, 1, c.d_model, rng);
  a.energy_embedding = Conv1dParams::init(3, 1, c.d_model, rng);
  a.duration_context_embedding = Conv1dParams::init(3, 1, c.d_model, rng);
  for (std::size_t i = 0; i < c.decoder_layers; ++i) {
    params_.decoder.push_back(LinkAttentionBlockParams::init(c.d_model, c.n_heads, c.ffn_hidden, rng));
  }
  params_.mel_projection = Linear::init(c.d_model, c.n_mels, rng);
  params_.aligner = AlignerParams::init(c.phoneme_vocab, c.n_mels, c.align_dim, rng);
}

ParamList Model::parameters() const {
  ParamList out;
  out.push_back({"gfe.prototypes", params_.prototypes});
  for (std::size_t i = 0; i < params_.gfe.size(); ++i) {
    params_.gfe[i].collect("gfe.layer" + std::to_string(i), out);
  }
  params_.gfe_projection.collect("gfe.projection", out);
  out.push_back({"decoder.linking_keys", params_.linking_keys});
  out.push_back({"encoder.phoneme_embedding", params_.phoneme_embedding});
  for (std::size_t i = 0; i < params_.encoder.size(); ++i) {
    params_.encoder[i].collect("encoder.block" + std::to_string(i), out);
  }
  const auto& a = params_.adaptor;
  a.duration.collect("adaptor.duration", out);
  a.pitch.collect("adaptor.pitch", out);
  a.energy.collect("adaptor.energy", out);
  a.pitch_embedding.collect("adaptor.pitch_embedding", out);
  a.energy_embedding.collect("adaptor.energy_embedding", out);
  a.duration_context_embedding.collect("adaptor.duration_context_embedding", out);
  for (std::size_t i = 0; i < params_.decoder.size(); ++i) {
    params_.decoder[i].collect("decoder.block" + std::to_string(i), out);
  }
  params_.mel_projection.collect("decoder.mel_projection", out);
  params_.aligner.collect("aligner", out);
  return out;
}

GlobalFactorTokens Model::encode_global_factors(const ReferenceFeature& feature) const {
  if (!feature.frames.defined()) throw ContractError("reference feature is empty");
  if (feature.frames.rank() != 2 || feature.frames.dim(1) != config_.feature_dim) {
    throw DimensionError("reference feature " + shape_str(feature.frames.shape()) + " expected [T, " +
                         std::to_string(config_.feature_dim) + "]");
  }
  Tensor z = params_.prototypes;
  for (const auto& layer : params_.gfe) z = cross_attention_module(z, feature.frames, layer);
  return {params_.gfe_projection(z)};
}

Tensor Model::encode_phonemes(const PhonemeSequence& text, const GlobalFactorTokens& global) const {
  text.validate(config_.phoneme_vocab);
  std::vector<std::size_t> ids(text.ids.begin(), text.ids.end());
  Tensor h = gather_rows(params_.phoneme_embedding, ids);
  h = add(h, sinusoidal_positions(ids.size(), config_.d_model));
  h = add_row(h, global.style_token());
  for (const auto& block : params_.encoder) h = fft_block(h, nullptr, block);
  return h;
}

Tensor Model::embed_track(const Conv1dParams& conv, std::span<const double> values) const {
  return conv(Tensor::from({values.size(), 1}, std::vector<double>(values.begin(), values.end())));
}

VarianceAdaptorOutput Model::variance_adapt(const Tensor& encoded, const VarianceAdaptorRequest& request,
                                            const ForwardMode& mode) const {
  const std::size_t n = encoded.dim(0);
  const auto& a = params_.adaptor;
  if (request.mode == AdaptMode::Train && !request.teacher) {
    throw ContractError("variance_adapt: train mode needs teacher prosody");
  }
  if (request.teacher) {
    const auto& t = *request.teacher;
    if (t.size() != n || t.pitch.size() != n || t.energy.size() != n) {
      throw InputError("variance_adapt: teacher prosody length does not match the phonemes");
    }
    for (int d : t.duration) {
      if (d < 0) throw InputError("variance_adapt: negative teacher duration");
    }
  }
  if (request.predict && request.predict->size() != n) {
    throw InputError("variance_adapt: predict mask length does not match the phonemes");
  }

  Tensor h = encoded;
  if (request.context) {
    const auto& ctx = *request.context;
    if (ctx.size() != n || ctx.duration.size() != n || ctx.pitch.size() != n || ctx.energy.size() != n) {
      throw InputError("variance_adapt: prosody context length does not match the phonemes");
    }
    std::vector<double> log_dur(n);
    for (std::size_t i = 0; i < n; ++i) log_dur[i] = std::log1p(ctx.duration[i]);
    Tensor emb = add(add(embed_track(a.duration_context_embedding, log_dur),
                         embed_track(a.pitch_embedding, ctx.pitch)),
                     embed_track(a.energy_embedding, ctx.energy));
    std::vector<double> keep(n * config_.d_model);
    for (std::size_t i = 0; i < n; ++i) {
      std::fill_n(keep.begin() + i * config_.d_model, config_.d_model, ctx.mask[i] ? 0.0 : 1.0);
    }
    h = add(h, mul(emb, Tensor::from({n, config_.d_model}, std::move(keep))));
  }

  VarianceAdaptorOutput out;
  out.log_duration = variance_predictor(h, a.duration, mode);
  out.pitch = variance_predictor(h, a.pitch, mode);
  out.energy = variance_predictor(h, a.energy, mode);

  out.durations.resize(n);
  out.pitch_used.resize(n);
  out.energy_used.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    bool use_prediction = request.mode == AdaptMode::Infer;
    if (use_prediction && request.teacher) use_prediction = request.predict && (*request.predict)[i];
    if (use_prediction) {
      out.durations[i] = discretize_duration(out.log_duration.at(i), config_.max_duration);
      out.pitch_used[i] = out.pitch.at(i);
      out.energy_used[i] = out.energy.at(i);
    } else {
      out.durations[i] = request.teacher->duration[i];
      out.pitch_used[i] = request.teacher->pitch[i];
      out.energy_used[i] = request.teacher->energy[i];
    }
  }
  h = add(h, add(embed_track(a.pitch_embedding, out.pitch_used),
                 embed_track(a.energy_embedding, out.energy_used)));
  long total = 0;
  for (int d : out.durations) total += d;
  if (total == 0) throw ContractError("variance_adapt: durations sum to zero");
  out.frames = length_regulate(h, out.durations);
  return out;
}

Tensor Model::decode_mel(const Tensor& frames, const GlobalFactorTokens& global) const {
  return decode_mel(frames, global, params_.linking_keys);
}

Tensor Model::decode_mel(const Tensor& frames, const GlobalFactorTokens& global,
                         const Tensor& linking_keys) const {
  if (global.tokens.dim(0) != linking_keys.dim(0)) {
    throw DimensionError("decode_mel: " + std::to_string(global.tokens.dim(0)) + " tokens but " +
                         std::to_string(linking_keys.dim(0)) + " linking keys");
  }
  Tensor h = add(frames, sinusoidal_positions(frames.dim(0), config_.d_model));
  for (const auto& block : params_.decoder) {
    h = link_attention_block(h, global.tokens, linking_keys, nullptr, block);
  }
  return params_.mel_projection(h);
}

Tensor Model::aligner_embedding(const PhonemeSequence& text) const {
  text.validate(config_.phoneme_vocab);
  std::vector<std::size_t> ids(text.ids.begin(), text.ids.end());
  return gather_rows(params_.aligner.text_embedding, ids);
}

}  // namespace retts

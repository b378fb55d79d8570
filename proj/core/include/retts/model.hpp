#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "retts/alignment.hpp"
#include "retts/layers.hpp"
#include "retts/tensor.hpp"

namespace retts {

/// Architecture constants. Defaults are the full-size model; desk-scale runs
/// override them through config files.
struct ModelConfig {
  std::size_t tokens = 60;            // m, size of the global token set
  std::size_t encoder_layers = 6;
  std::size_t decoder_layers = 6;
  std::size_t gfe_layers = 3;         // cross-attention modules in the global encoder
  std::size_t d_model = 384;
  std::size_t ffn_hidden = 1536;
  std::size_t gfe_channels = 192;
  std::size_t gfe_ffn_hidden = 512;
  std::size_t n_heads = 2;
  std::size_t n_mels = 20;
  std::size_t phoneme_vocab = 40;
  std::size_t max_duration = 20;
  std::size_t feature_dim = 32;       // channels of the reference feature
  std::size_t predictor_channels = 256;
  double predictor_dropout = 0.1;
  std::size_t align_dim = 32;

  /// Throws ContractError on zero extents or indivisible head splits.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// The m x d_model token set; row 0 is the style token.
struct GlobalFactorTokens {
  Tensor tokens;

  std::size_t count() const { return tokens.dim(0); }
  Tensor style_token() const;
};

/// Stand-in for the self-supervised feature sequence of a reference utterance.
struct ReferenceFeature {
  Tensor frames;  // [T_F, feature_dim]
};

struct PhonemeSequence {
  std::vector<int> ids;
  std::vector<int> word_index;  // non-decreasing, starts at 0, no gaps

  std::size_t size() const { return ids.size(); }
  std::size_t word_count() const;
  /// [begin, end) phoneme range of words [first_word, last_word].
  std::pair<std::size_t, std::size_t> word_span(std::size_t first_word, std::size_t last_word) const;
  /// Throws InputError unless the invariants hold and ids are below vocab.
  void validate(std::size_t vocab) const;
};

struct ProsodyTrack {
  std::vector<int> duration;  // frames per phoneme
  std::vector<double> pitch;
  std::vector<double> energy;

  std::size_t size() const { return duration.size(); }
  long total_frames() const;
};

/// Known prosody around a region to inpaint. Masked entries are exactly zero.
struct ProsodyContext {
  std::vector<double> duration;
  std::vector<double> pitch;
  std::vector<double> energy;
  std::vector<bool> mask;  // true = unknown

  /// Copies `track`, zeroing every masked position.
  static ProsodyContext from_track(const ProsodyTrack& track, std::vector<bool> mask);
  std::size_t size() const { return mask.size(); }
};

struct VarianceAdaptorParams {
  VariancePredictorParams duration;
  VariancePredictorParams pitch;
  VariancePredictorParams energy;
  Conv1dParams pitch_embedding;             // shared by teacher and context values
  Conv1dParams energy_embedding;            // shared by teacher and context values
  Conv1dParams duration_context_embedding;  // embeds log(1 + d_ctx)
};

struct ModelParams {
  Tensor prototypes;  // [m, gfe_channels]
  std::vector<CrossAttentionModuleParams> gfe;
  Linear gfe_projection;  // gfe_channels -> d_model
  Tensor linking_keys;    // [m, d_model]
  Tensor phoneme_embedding;  // [vocab, d_model]
  std::vector<FFTBlockParams> encoder;
  VarianceAdaptorParams adaptor;
  std::vector<LinkAttentionBlockParams> decoder;
  Linear mel_projection;  // d_model -> n_mels
  AlignerParams aligner;
};

enum class AdaptMode { Train, Infer };

/// What the variance adaptor conditions on.
///
/// Train: teacher values drive the embeddings and the length regulator.
/// Infer: predictions do, except where `teacher` is given and `predict` is
/// false for that phoneme (used by word insertion to keep the context fixed).
struct VarianceAdaptorRequest {
  AdaptMode mode = AdaptMode::Infer;
  const ProsodyContext* context = nullptr;
  const ProsodyTrack* teacher = nullptr;
  const std::vector<bool>* predict = nullptr;
};

struct VarianceAdaptorOutput {
  Tensor frames;        // [T, d_model], length regulated
  Tensor log_duration;  // [N], regresses log(1 + d)
  Tensor pitch;         // [N]
  Tensor energy;        // [N]
  std::vector<int> durations;  // what the length regulator used
  std::vector<double> pitch_used;
  std::vector<double> energy_used;
};

/// Repeats row i of H durations[i] times; zero-duration rows are dropped.
Tensor length_regulate(const Tensor& H, std::span<const int> durations);

/// Duration a log(1 + d) prediction turns into at inference.
int discretize_duration(double log_duration, std::size_t max_duration);

class Model {
 public:
  /// Parameters are drawn from the "init" stream of `seed`.
  Model(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }
  /// Every learnable tensor, in a fixed order with stable names.
  ParamList parameters() const;

  GlobalFactorTokens encode_global_factors(const ReferenceFeature& feature) const;
  Tensor encode_phonemes(const PhonemeSequence& text, const GlobalFactorTokens& global) const;
  VarianceAdaptorOutput variance_adapt(const Tensor& encoded, const VarianceAdaptorRequest& request,
                                       const ForwardMode& mode) const;
  Tensor decode_mel(const Tensor& frames, const GlobalFactorTokens& global) const;
  Tensor decode_mel(const Tensor& frames, const GlobalFactorTokens& global,
                    const Tensor& linking_keys) const;
  /// Aligner input for a phoneme sequence: rows of the aligner's own table.
  Tensor aligner_embedding(const PhonemeSequence& text) const;

 private:
  Tensor embed_track(const Conv1dParams& conv, std::span<const double> values) const;

  ModelConfig config_;
  ModelParams params_;
};

}  // namespace retts

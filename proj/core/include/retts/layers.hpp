#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "retts/rng.hpp"
#include "retts/tensor.hpp"

namespace retts {

struct NamedParam {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

/// Dropout switch threaded through forward passes. Dropout needs a stream
/// whenever training is true.
struct ForwardMode {
  bool training = false;
  RngStream* rng = nullptr;
};

/// y = x W + b with W stored [in, out].
struct Linear {
  Tensor weight;
  Tensor bias;  // undefined when the layer has no bias

  static Linear init(std::size_t in, std::size_t out, RngStream& rng, bool with_bias = true);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

struct LayerNormParams {
  Tensor gain;
  Tensor bias;

  static LayerNormParams init(std::size_t dim);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

/// 1-d convolution over the time axis of a [T, C] sequence.
struct Conv1dParams {
  Tensor weight;  // [K, Cin, Cout]
  Tensor bias;    // [Cout]
  std::size_t stride = 1;
  std::size_t pad = 1;

  static Conv1dParams init(std::size_t kernel, std::size_t in, std::size_t out, RngStream& rng,
                           std::size_t stride = 1, std::size_t pad = 1);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

struct MultiHeadAttentionParams {
  Linear query;  // d_q -> d_model
  Linear key;    // d_k -> d_model, no bias (softmax is shift-invariant per query)
  Linear value;  // d_v -> d_model
  Linear output; // d_model -> d_model
  std::size_t n_heads = 1;

  static MultiHeadAttentionParams init(std::size_t d_query, std::size_t d_key, std::size_t d_value,
                                       std::size_t d_model, std::size_t n_heads, RngStream& rng);
  std::size_t d_model() const { return output.weight.dim(0); }
  void collect(const std::string& prefix, ParamList& out) const;
};

/// conv(k=3) -> ReLU -> conv(k=3), length preserving.
struct ConvFFNParams {
  Conv1dParams conv_in;
  Conv1dParams conv_out;

  static ConvFFNParams init(std::size_t d_model, std::size_t hidden, RngStream& rng);
  void collect(const std::string& prefix, ParamList& out) const;
};

/// Pre-norm feed-forward transformer block used by the phoneme encoder.
struct FFTBlockParams {
  LayerNormParams norm_attn;
  MultiHeadAttentionParams self_attn;
  LayerNormParams norm_ffn;
  ConvFFNParams ffn;

  static FFTBlockParams init(std::size_t d_model, std::size_t n_heads, std::size_t ffn_hidden,
                             RngStream& rng);
  void collect(const std::string& prefix, ParamList& out) const;
};

/// Decoder block: self-attention, then attention from frames onto the global
/// tokens through the linking keys, then Conv-FFN.
struct LinkAttentionBlockParams {
  LayerNormParams norm_self;
  MultiHeadAttentionParams self_attn;
  LayerNormParams norm_link;
  MultiHeadAttentionParams link_attn;
  LayerNormParams norm_ffn;
  ConvFFNParams ffn;

  static LinkAttentionBlockParams init(std::size_t d_model, std::size_t n_heads,
                                       std::size_t ffn_hidden, RngStream& rng);
  void collect(const std::string& prefix, ParamList& out) const;
};

/// One stage of the global factor encoder: tokens attend to the reference
/// feature, get mixed across the token axis, then pass through an MLP.
struct CrossAttentionModuleParams {
  MultiHeadAttentionParams cross_attn;
  LayerNormParams norm_attn;
  Tensor token_mixer;  // [m, m]
  LayerNormParams norm_mix;
  Linear mlp_in;
  Linear mlp_out;
  LayerNormParams norm_mlp;

  static CrossAttentionModuleParams init(std::size_t tokens, std::size_t channels,
                                         std::size_t feature_dim, std::size_t ffn_hidden,
                                         std::size_t n_heads, RngStream& rng);
  void collect(const std::string& prefix, ParamList& out) const;
};

/// Three convolutions (k=3) regressing one scalar per position; the first two
/// are followed by ReLU, layer norm and dropout.
struct VariancePredictorParams {
  Conv1dParams conv1;
  LayerNormParams norm1;
  Conv1dParams conv2;
  LayerNormParams norm2;
  Conv1dParams conv_out;
  double dropout = 0.1;

  static VariancePredictorParams init(std::size_t d_model, std::size_t channels, double dropout,
                                      RngStream& rng);
  void collect(const std::string& prefix, ParamList& out) const;
};

/// Scaled dot-product attention over n_heads heads. `mask`, when given, has
/// T_q * T_k entries; true hides that key from that query. When `weights` is
/// non-null it receives one [T_q, T_k] attention matrix per head.
Tensor multi_head_attention(const Tensor& query, const Tensor& key, const Tensor& value,
                            const std::vector<bool>* mask, const MultiHeadAttentionParams& params,
                            std::vector<Tensor>* weights = nullptr);

Tensor conv_ffn(const Tensor& x, const ConvFFNParams& params);

Tensor fft_block(const Tensor& x, const std::vector<bool>* mask, const FFTBlockParams& params);

Tensor link_attention_block(const Tensor& x, const Tensor& tokens, const Tensor& linking_keys,
                            const std::vector<bool>* mask, const LinkAttentionBlockParams& params);

Tensor cross_attention_module(const Tensor& tokens, const Tensor& feature,
                              const CrossAttentionModuleParams& params);

/// Returns a [T] vector.
Tensor variance_predictor(const Tensor& x, const VariancePredictorParams& params,
                          const ForwardMode& mode);

/// Standard sinusoidal absolute position table, [length, dim].
Tensor sinusoidal_positions(std::size_t length, std::size_t dim);

}  // namespace retts

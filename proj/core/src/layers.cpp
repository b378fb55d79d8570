#include "retts/layers.hpp"

#include <cmath>

#include "retts/error.hpp"
#include "retts/ops.hpp"

namespace retts {

Linear Linear::init(std::size_t in, std::size_t out, RngStream& rng, bool with_bias) {
  Linear l;
  l.weight = rng_normal(rng, {in, out}, 1.0 / std::sqrt(static_cast<double>(in)));
  l.weight.set_requires_grad(true);
  if (with_bias) l.bias = Tensor::zeros({out}).set_requires_grad(true);
  return l;
}

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = matmul(x, weight);
  return bias.defined() ? add_row(y, bias) : y;
}

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight});
  if (bias.defined()) out.push_back({prefix + ".bias", bias});
}

LayerNormParams LayerNormParams::init(std::size_t dim) {
  LayerNormParams p;
  p.gain = Tensor::full({dim}, 1.0).set_requires_grad(true);
  p.bias = Tensor::zeros({dim}).set_requires_grad(true);
  return p;
}

Tensor LayerNormParams::operator()(const Tensor& x) const { return layer_norm(x, gain, bias); }

void LayerNormParams::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".gain", gain});
  out.push_back({prefix + ".bias", bias});
}

Conv1dParams Conv1dParams::init(std::size_t kernel, std::size_t in, std::size_t out, RngStream& rng,
                                std::size_t stride, std::size_t pad) {
  Conv1dParams c;
  c.weight = rng_normal(rng, {kernel, in, out}, 1.0 / std::sqrt(static_cast<double>(kernel * in)));
  c.weight.set_requires_grad(true);
  c.bias = Tensor::zeros({out}).set_requires_grad(true);
  c.stride = stride;
  c.pad = pad;
  return c;
}

Tensor Conv1dParams::operator()(const Tensor& x) const { return conv1d(x, weight, bias, stride, pad); }

void Conv1dParams::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

MultiHeadAttentionParams MultiHeadAttentionParams::init(std::size_t d_query, std::size_t d_key,
                                                        std::size_t d_value, std::size_t d_model,
                                                        std::size_t n_heads, RngStream& rng) {
  if (n_heads == 0 || d_model % n_heads != 0) {
    throw ContractError("attention: d_model " + std::to_string(d_model) +
                        " not divisible by n_heads " + std::to_string(n_heads));
  }
  MultiHeadAttentionParams p;
  p.query = Linear::init(d_query, d_model, rng);
  p.key = Linear::init(d_key, d_model, rng, /*with_bias=*/false);
  p.value = Linear::init(d_value, d_model, rng);
  p.output = Linear::init(d_model, d_model, rng);
  p.n_heads = n_heads;
  return p;
}

void MultiHeadAttentionParams::collect(const std::string& prefix, ParamList& out) const {
  query.collect(prefix + ".query", out);
  key.collect(prefix + ".key", out);
  value.collect(prefix + ".value", out);
  output.collect(prefix + ".output", out);
}

ConvFFNParams ConvFFNParams::init(std::size_t d_model, std::size_t hidden, RngStream& rng) {
  return {Conv1dParams::init(3, d_model, hidden, rng), Conv1dParams::init(3, hidden, d_model, rng)};
}

void ConvFFNParams::collect(const std::string& prefix, ParamList& out) const {
  conv_in.collect(prefix + ".conv_in", out);
  conv_out.collect(prefix + ".conv_out", out);
}

FFTBlockParams FFTBlockParams::init(std::size_t d_model, std::size_t n_heads, std::size_t ffn_hidden,
                                    RngStream& rng) {
  FFTBlockParams p;
  p.norm_attn = LayerNormParams::init(d_model);
  p.self_attn = MultiHeadAttentionParams::init(d_model, d_model, d_model, d_model, n_heads, rng);
  p.norm_ffn = LayerNormParams::init(d_model);
  p.ffn = ConvFFNParams::init(d_model, ffn_hidden, rng);
  return p;
}

void FFTBlockParams::collect(const std::string& prefix, ParamList& out) const {
  norm_attn.collect(prefix + ".norm_attn", out);
  self_attn.collect(prefix + ".self_attn", out);
  norm_ffn.collect(prefix + ".norm_ffn", out);
  ffn.collect(prefix + ".ffn", out);
}

LinkAttentionBlockParams LinkAttentionBlockParams::init(std::size_t d_model, std::size_t n_heads,
                                                        std::size_t ffn_hidden, RngStream& rng) {
  LinkAttentionBlockParams p;
  p.norm_self = LayerNormParams::init(d_model);
  p.self_attn = MultiHeadAttentionParams::init(d_model, d_model, d_model, d_model, n_heads, rng);
  p.norm_link = LayerNormParams::init(d_model);
  p.link_attn = MultiHeadAttentionParams::init(d_model, d_model, d_model, d_model, n_heads, rng);
  p.norm_ffn = LayerNormParams::init(d_model);
  p.ffn = ConvFFNParams::init(d_model, ffn_hidden, rng);
  return p;
}

void LinkAttentionBlockParams::collect(const std::string& prefix, ParamList& out) const {
  norm_self.collect(prefix + ".norm_self", out);
  self_attn.collect(prefix + ".self_attn", out);
  norm_link.collect(prefix + ".norm_link", out);
  link_attn.collect(prefix + ".link_attn", out);
  norm_ffn.collect(prefix + ".norm_ffn", out);
  ffn.collect(prefix + ".ffn", out);
}

CrossAttentionModuleParams CrossAttentionModuleParams::init(std::size_t tokens, std::size_t channels,
                                                            std::size_t feature_dim,
                                                            std::size_t ffn_hidden,
                                                            std::size_t n_heads, RngStream& rng) {
  CrossAttentionModuleParams p;
  p.cross_attn =
      MultiHeadAttentionParams::init(channels, feature_dim, feature_dim, channels, n_heads, rng);
  p.norm_attn = LayerNormParams::init(channels);
  p.token_mixer = rng_normal(rng, {tokens, tokens}, 1.0 / std::sqrt(static_cast<double>(tokens)));
  p.token_mixer.set_requires_grad(true);
  p.norm_mix = LayerNormParams::init(channels);
  p.mlp_in = Linear::init(channels, ffn_hidden, rng);
  p.mlp_out = Linear::init(ffn_hidden, channels, rng);
  p.norm_mlp = LayerNormParams::init(channels);
  return p;
}

void CrossAttentionModuleParams::collect(const std::string& prefix, ParamList& out) const {
  cross_attn.collect(prefix + ".cross_attn", out);
  norm_attn.collect(prefix + ".norm_attn", out);
  out.push_back({prefix + ".token_mixer", token_mixer});
  norm_mix.collect(prefix + ".norm_mix", out);
  mlp_in.collect(prefix + ".mlp_in", out);
  mlp_out.collect(prefix + ".mlp_out", out);
  norm_mlp.collect(prefix + ".norm_mlp", out);
}

VariancePredictorParams VariancePredictorParams::init(std::size_t d_model, std::size_t channels,
                                                      double dropout, RngStream& rng) {
  VariancePredictorParams p;
  p.conv1 = Conv1dParams::init(3, d_model, channels, rng);
  p.norm1 = LayerNormParams::init(channels);
  p.conv2 = Conv1dParams::init(3, channels, channels, rng);
  p.norm2 = LayerNormParams::init(channels);
  p.conv_out = Conv1dParams::init(3, channels, 1, rng);
  p.dropout = dropout;
  return p;
}

void VariancePredictorParams::collect(const std::string& prefix, ParamList& out) const {
  conv1.collect(prefix + ".conv1", out);
  norm1.collect(prefix + ".norm1", out);
  conv2.collect(prefix + ".conv2", out);
  norm2.collect(prefix + ".norm2", out);
  conv_out.collect(prefix + ".conv_out", out);
}

Tensor multi_head_attention(const Tensor& query, const Tensor& key, const Tensor& value,
                            const std::vector<bool>* mask, const MultiHeadAttentionParams& params,
                            std::vector<Tensor>* weights) {
  if (key.dim(0) != value.dim(0)) {
    throw DimensionError("attention: " + std::to_string(key.dim(0)) + " keys but " +
                         std::to_string(value.dim(0)) + " values");
  }
  const std::size_t d_model = params.d_model();
  const std::size_t heads = params.n_heads;
  const std::size_t head_dim = d_model / heads;
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(head_dim));

  Tensor q = params.query(query);
  Tensor k = params.key(key);
  Tensor v = params.value(value);
  std::vector<Tensor> head_outputs;
  head_outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t lo = h * head_dim, hi = lo + head_dim;
    Tensor qh = heads == 1 ? q : slice_cols(q, lo, hi);
    Tensor kh = heads == 1 ? k : slice_cols(k, lo, hi);
    Tensor vh = heads == 1 ? v : slice_cols(v, lo, hi);
    Tensor logits = scale(matmul(qh, transpose(kh)), scale_factor);
    Tensor attn = mask ? masked_softmax_lastdim(logits, *mask) : softmax_lastdim(logits);
    if (weights) weights->push_back(attn);
    head_outputs.push_back(matmul(attn, vh));
  }
  Tensor merged = heads == 1 ? head_outputs.front() : concat_cols(head_outputs);
  return params.output(merged);
}

Tensor conv_ffn(const Tensor& x, const ConvFFNParams& params) {
  return params.conv_out(relu(params.conv_in(x)));
}

Tensor fft_block(const Tensor& x, const std::vector<bool>* mask, const FFTBlockParams& params) {
  Tensor normed = params.norm_attn(x);
  Tensor h = add(x, multi_head_attention(normed, normed, normed, mask, params.self_attn));
  return add(h, conv_ffn(params.norm_ffn(h), params.ffn));
}

Tensor link_attention_block(const Tensor& x, const Tensor& tokens, const Tensor& linking_keys,
                            const std::vector<bool>* mask, const LinkAttentionBlockParams& params) {
  if (tokens.dim(0) != linking_keys.dim(0)) {
    throw DimensionError("link attention: " + std::to_string(tokens.dim(0)) + " tokens but " +
                         std::to_string(linking_keys.dim(0)) + " linking keys");
  }
  Tensor normed = params.norm_self(x);
  Tensor h1 = add(x, multi_head_attention(normed, normed, normed, mask, params.self_attn));
  Tensor h2 = add(h1, multi_head_attention(params.norm_link(h1), linking_keys, tokens, nullptr,
                                           params.link_attn));
  return add(h2, conv_ffn(params.norm_ffn(h2), params.ffn));
}

Tensor cross_attention_module(const Tensor& tokens, const Tensor& feature,
                              const CrossAttentionModuleParams& params) {
  if (params.token_mixer.dim(0) != tokens.dim(0) || params.token_mixer.dim(1) != tokens.dim(0)) {
    throw DimensionError("cross attention: token mixer " + shape_str(params.token_mixer.shape()) +
                         " for " + std::to_string(tokens.dim(0)) + " tokens");
  }
  Tensor z1 = params.norm_attn(
      add(tokens, multi_head_attention(tokens, feature, feature, nullptr, params.cross_attn)));
  Tensor z2 = params.norm_mix(add(z1, matmul(params.token_mixer, z1)));
  Tensor mlp = params.mlp_out(relu(params.mlp_in(z2)));
  return params.norm_mlp(add(z2, mlp));
}

Tensor variance_predictor(const Tensor& x, const VariancePredictorParams& params,
                          const ForwardMode& mode) {
  auto maybe_dropout = [&](const Tensor& h) {
    if (!mode.training || params.dropout == 0.0) return h;
    if (!mode.rng) throw ContractError("variance predictor: training mode needs a dropout stream");
    return dropout(h, params.dropout, *mode.rng);
  };
  Tensor h = maybe_dropout(params.norm1(relu(params.conv1(x))));
  h = maybe_dropout(params.norm2(relu(params.conv2(h))));
  Tensor out = params.conv_out(h);
  return reshape(out, {out.dim(0)});
}

Tensor sinusoidal_positions(std::size_t length, std::size_t dim) {
  std::vector<double> table(length * dim);
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      const double angle = static_cast<double>(pos) * rate;
      table[pos * dim + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return Tensor::from({length, dim}, std::move(table));
}

}  // namespace retts

#include "retts/gradcheck_suite.hpp"

#include <algorithm>
#include <functional>

#include "retts/alignment.hpp"
#include "retts/discriminator.hpp"
#include "retts/gradcheck.hpp"
#include "retts/losses.hpp"
#include "retts/ops.hpp"
#include "retts/rng.hpp"

namespace retts {

namespace {

constexpr std::size_t kPhonemes = 3;
constexpr std::size_t kFrames = 6;

class Suite {
 public:
  Suite(std::uint64_t seed, double eps) : rng_(seed, "gradcheck"), seed_(seed), eps_(eps) {}

  Tensor input(Shape shape, double stddev = 1.0) { return rng_normal(rng_, std::move(shape), stddev); }

  /// sum(y * w) with a fixed random w, so no output direction is left out.
  std::function<Tensor(const Tensor&)> projector(Shape shape) {
    Tensor w = input(std::move(shape));
    return [w](const Tensor& y) { return sum(mul(y, w)); };
  }

  /// Checks f against every listed tensor; `inputs` are perturbed in place.
  void check(const std::string& name, const std::function<Tensor()>& f, const ParamList& params,
             std::vector<Tensor> inputs = {}) {
    GradcheckReport report{name, 0.0, 0};
    for (const auto& p : params) inputs.push_back(p.tensor);
    for (Tensor& t : inputs) {
      report.max_relative_error = std::max(report.max_relative_error, grad_check_captured(f, t, eps_));
      report.checked += t.numel();
    }
    reports.push_back(report);
  }

  RngStream& rng() { return rng_; }
  std::uint64_t seed() const { return seed_; }

  std::vector<GradcheckReport> reports;

 private:
  RngStream rng_;
  std::uint64_t seed_;
  double eps_;
};

template <typename P>
ParamList collected(const P& p) {
  ParamList out;
  p.collect("", out);
  return out;
}

}  // namespace

ModelConfig gradcheck_toy_config() {
  ModelConfig c;
  c.tokens = 4;
  c.encoder_layers = 2;
  c.decoder_layers = 2;
  c.gfe_layers = 1;
  c.d_model = 8;
  c.ffn_hidden = 16;
  c.gfe_channels = 8;
  c.gfe_ffn_hidden = 16;
  c.n_heads = 2;
  c.n_mels = 4;
  c.phoneme_vocab = 10;
  c.max_duration = 20;
  c.feature_dim = 4;
  c.predictor_channels = 8;
  c.predictor_dropout = 0.1;
  c.align_dim = 4;
  return c;
}

std::vector<GradcheckReport> run_gradcheck_suite(const ModelConfig& config, std::uint64_t seed, double eps) {
  config.validate();
  Suite s(seed, eps);
  const std::size_t d = config.d_model;
  const std::size_t m = config.tokens;
  const std::size_t t = kFrames;
  const std::size_t n = kPhonemes;

  {
    const Linear layer = Linear::init(d, 5, s.rng());
    const Tensor x = s.input({t, d});
    const auto proj = s.projector({t, 5});
    s.check("linear", [&] { return proj(layer(x)); }, collected(layer), {x});
  }
  {
    LayerNormParams norm = LayerNormParams::init(d);
    norm.gain.mutable_data()[0] = 1.5;
    const Tensor x = s.input({t, d});
    const auto proj = s.projector({t, d});
    s.check("layer_norm", [&] { return proj(norm(x)); }, collected(norm), {x});
  }
  {
    const Conv1dParams conv = Conv1dParams::init(3, d, 5, s.rng());
    const Conv1dParams strided = Conv1dParams::init(5, d, 3, s.rng(), 2, 2);
    const Tensor x = s.input({t, d});
    const auto proj = s.projector({t, 5});
    const auto proj2 = s.projector({(t + 4 - 5) / 2 + 1, 3});
    ParamList params = collected(conv);
    for (auto& p : collected(strided)) params.push_back(p);
    s.check("conv1d", [&] { return add(proj(conv(x)), proj2(strided(x))); }, params, {x});
  }
  {
    const auto attn = MultiHeadAttentionParams::init(d, d, d, d, config.n_heads, s.rng());
    const Tensor q = s.input({t, d});
    const Tensor kv = s.input({n + 1, d});
    std::vector<bool> mask(t * (n + 1), false);
    mask[1] = true;
    const auto proj = s.projector({t, d});
    s.check("multi_head_attention", [&] { return proj(multi_head_attention(q, kv, kv, &mask, attn)); },
            collected(attn), {q, kv});
  }
  {
    const auto ffn = ConvFFNParams::init(d, config.ffn_hidden, s.rng());
    const Tensor x = s.input({t, d});
    const auto proj = s.projector({t, d});
    s.check("conv_ffn", [&] { return proj(conv_ffn(x, ffn)); }, collected(ffn), {x});
  }
  {
    const auto block = FFTBlockParams::init(d, config.n_heads, config.ffn_hidden, s.rng());
    const Tensor x = s.input({n, d});
    const auto proj = s.projector({n, d});
    s.check("fft_block", [&] { return proj(fft_block(x, nullptr, block)); }, collected(block), {x});
  }
  {
    const auto block = LinkAttentionBlockParams::init(d, config.n_heads, config.ffn_hidden, s.rng());
    const Tensor x = s.input({t, d});
    const Tensor tokens = s.input({m, d});
    const Tensor keys = s.input({m, d});
    const auto proj = s.projector({t, d});
    s.check("link_attention_block", [&] { return proj(link_attention_block(x, tokens, keys, nullptr, block)); },
            collected(block), {x, tokens, keys});
  }
  {
    const auto module = CrossAttentionModuleParams::init(m, config.gfe_channels, config.feature_dim,
                                                         config.gfe_ffn_hidden, config.n_heads, s.rng());
    const Tensor tokens = s.input({m, config.gfe_channels});
    const Tensor feature = s.input({t / 2, config.feature_dim});
    const auto proj = s.projector({m, config.gfe_channels});
    s.check("cross_attention_module", [&] { return proj(cross_attention_module(tokens, feature, module)); },
            collected(module), {tokens, feature});
  }
  {
    const auto predictor = VariancePredictorParams::init(d, config.predictor_channels, config.predictor_dropout,
                                                         s.rng());
    const Tensor x = s.input({n, d});
    const auto proj = s.projector({n});
    // A fresh stream per evaluation keeps the dropout pattern fixed.
    s.check("variance_predictor",
            [&] {
              RngStream dropout(s.seed(), "gradcheck-dropout");
              return proj(variance_predictor(x, predictor, ForwardMode{true, &dropout}));
            },
            collected(predictor), {x});
  }
  {
    const Tensor h = s.input({n, d});
    const std::vector<int> durations{2, 0, 3};
    const auto proj = s.projector({5, d});
    s.check("length_regulate", [&] { return proj(length_regulate(h, durations)); }, {}, {h});
  }
  {
    const auto aligner = AlignerParams::init(config.phoneme_vocab, config.n_mels, config.align_dim, s.rng());
    const Tensor mel = s.input({t, config.n_mels});
    const Tensor phon = s.input({n, config.align_dim});
    s.check("soft_alignment+forward_sum",
            [&] { return forward_sum_loss(soft_alignment(mel, phon, aligner).log_probs); },
            collected(aligner), {mel, phon});
  }
  {
    TrainConfig cfg;
    cfg.disc_chunk = 8;
    cfg.disc_channels = {3, 4};
    Discriminator disc(config.n_mels, cfg, s.rng());
    // The head starts at zero; move it off so every layer gets a gradient.
    for (auto& p : disc.parameters()) {
      if (p.name.rfind("disc.head", 0) == 0) {
        auto values = p.tensor.mutable_data();
        for (double& v : values) v = 0.5 * s.rng().normal();
      }
    }
    const Tensor real = s.input({8, config.n_mels});
    const Tensor fake = s.input({8, config.n_mels});
    s.check("discriminator+hinge", [&] { return hinge_d_loss(disc(real).score, disc(fake).score); },
            disc.parameters(), {real, fake});
    const auto real_features = disc(real).features;
    std::vector<Tensor> fixed;
    for (const auto& f : real_features) fixed.push_back(f.detach());
    s.check("feature_matching", [&] { return feature_matching_loss(fixed, disc(fake).features); },
            disc.parameters(), {fake});
  }
  {
    // The stage-1 objective through the whole model, teacher forced, with
    // the middle phoneme's context hidden and the aligner loss active.
    const Model model(config, seed);
    PhonemeSequence text;
    for (std::size_t i = 0; i < n; ++i) {
      text.ids.push_back(static_cast<int>(s.rng().uniform_int(config.phoneme_vocab)));
      text.word_index.push_back(static_cast<int>(i));
    }
    ProsodyTrack teacher;
    teacher.duration = {2, 1, 3};
    for (std::size_t i = 0; i < n; ++i) {
      teacher.pitch.push_back(s.rng().normal());
      teacher.energy.push_back(s.rng().normal());
    }
    const ProsodyContext context = ProsodyContext::from_track(teacher, {false, true, false});
    const ReferenceFeature reference{s.input({t / 2, config.feature_dim})};
    const Tensor mel = s.input({t, config.n_mels});
    TrainConfig cfg;
    s.check("end_to_end",
            [&] {
              const auto global = model.encode_global_factors(reference);
              const Tensor encoded = model.encode_phonemes(text, global);
              RngStream dropout(seed, "gradcheck-dropout");
              const auto adapted = model.variance_adapt(encoded, {AdaptMode::Train, &context, &teacher, nullptr},
                                                        ForwardMode{true, &dropout});
              const Tensor out = model.decode_mel(adapted.frames, global);
              const auto alignment = soft_alignment(mel, model.aligner_embedding(text), model.params().aligner);
              return stage1_loss({out, adapted.log_duration, adapted.pitch, adapted.energy},
                                 {mel, teacher.duration, teacher.pitch, teacher.energy}, &alignment.log_probs, cfg)
                  .total;
            },
            model.parameters(), {reference.frames});
  }
  return s.reports;
}

}  // namespace retts

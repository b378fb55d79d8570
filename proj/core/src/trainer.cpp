#include "retts/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "retts/error.hpp"
#include "retts/log.hpp"
#include "retts/ops.hpp"

namespace retts {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void zero_grads(std::span<Tensor> tensors) {
  for (Tensor& t : tensors) t.zero_grad();
}

Tensor accumulate(const Tensor& sum, const Tensor& term) { return sum.defined() ? add(sum, term) : term; }

constexpr const char* kMaskStream = "mask";
constexpr const char* kDropoutStream = "dropout";
constexpr const char* kChunkStream = "chunk";

}  // namespace

std::string StepMetrics::format(bool include_wall) const {
  std::string out = "step=" + std::to_string(step) + " stage=" + std::to_string(stage) + " lr=" + fmt(lr) +
                    " mel=" + fmt(stage1.mel_mse) + " dur=" + fmt(stage1.dur_mse) + " pitch=" +
                    fmt(stage1.pitch_mse) + " energy=" + fmt(stage1.energy_mse) + " align=" +
                    fmt(stage1.align_loss) + " stage1=" + fmt(stage1.total);
  if (stage == 2) out += " feat=" + fmt(feat) + " disc=" + fmt(disc);
  out += " total=" + fmt(total) + " grad_norm=" + fmt(grad_norm);
  if (include_wall) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", wall_seconds);
    out += std::string(" wall=") + buf;
  }
  return out;
}

void check_corpus(const ModelConfig& model, const Corpus& corpus) {
  if (corpus.utterances.empty()) throw InputError("corpus has no utterances");
  for (const auto& u : corpus.utterances) {
    u.text.validate(model.phoneme_vocab);
    if (u.mel.rank() != 2 || u.mel.dim(1) != model.n_mels) {
      throw InputError("utterance " + u.id + ": mel has shape " + shape_str(u.mel.shape()) + ", model expects " +
                       std::to_string(model.n_mels) + " mel bins");
    }
    if (u.reference.frames.rank() != 2 || u.reference.frames.dim(1) != model.feature_dim) {
      throw InputError("utterance " + u.id + ": reference feature has shape " +
                       shape_str(u.reference.frames.shape()) + ", model expects " +
                       std::to_string(model.feature_dim) + " channels");
    }
    if (u.mel.dim(0) < u.text.size()) throw InputError("utterance " + u.id + ": fewer frames than phonemes");
    if (u.prosody.size() != u.text.size() || u.prosody.total_frames() != static_cast<long>(u.mel.dim(0))) {
      throw InputError("utterance " + u.id + ": prosody does not match text and mel");
    }
  }
}

ProsodyTrack teacher_prosody(const Model& model, const Utterance& utt, DurationSource source,
                             const Tensor* log_probs) {
  if (source == DurationSource::Oracle) return utt.prosody;
  ProsodyTrack track;
  if (log_probs) {
    track.duration = extract_durations(*log_probs);
  } else {
    NoGradGuard guard;
    const auto a = soft_alignment(utt.mel, model.aligner_embedding(utt.text), model.params().aligner);
    track.duration = extract_durations(a.log_probs);
  }
  auto [pitch, energy] = pool_phoneme_prosody(utt.frames, track.duration);
  track.pitch = std::move(pitch);
  track.energy = std::move(energy);
  return track;
}

double evaluate_mel_mse(const Model& model, const Corpus& corpus, DurationSource source) {
  NoGradGuard guard;
  double total = 0.0;
  for (const auto& utt : corpus.utterances) {
    const auto global = model.encode_global_factors(utt.reference);
    const Tensor encoded = model.encode_phonemes(utt.text, global);
    const ProsodyTrack teacher = teacher_prosody(model, utt, source, nullptr);
    const ProsodyContext context = ProsodyContext::from_track(teacher, std::vector<bool>(teacher.size(), false));
    const auto adapted = model.variance_adapt(encoded, {AdaptMode::Train, &context, &teacher, nullptr}, {});
    total += mse_loss(model.decode_mel(adapted.frames, global), utt.mel).item();
  }
  return total / static_cast<double>(corpus.utterances.size());
}

struct Trainer::Forward {
  Tensor mel;
  Stage1Loss loss;
};

Trainer::Trainer(RunConfig config, Corpus corpus, std::uint64_t seed)
    : config_(std::move(config)),
      corpus_(std::move(corpus)),
      seed_(seed),
      mask_rng_(seed, kMaskStream),
      dropout_rng_(seed, kDropoutStream),
      chunk_rng_(seed, kChunkStream) {
  config_.model.validate();
  config_.train.validate();
  check_corpus(config_.model, corpus_);
  model_ = std::make_unique<Model>(config_.model, seed);
}

Trainer::Trainer(const Checkpoint& checkpoint, Corpus corpus, int stage, std::optional<TrainConfig> train)
    : config_(checkpoint.config),
      corpus_(std::move(corpus)),
      seed_(checkpoint.seed),
      stage_(stage),
      mask_rng_(checkpoint.seed, kMaskStream),
      dropout_rng_(checkpoint.seed, kDropoutStream),
      chunk_rng_(checkpoint.seed, kChunkStream) {
  if (stage != 1 && stage != 2) throw InputError("stage must be 1 or 2");
  if (checkpoint.stage == 2 && stage == 1) throw InputError("cannot continue a stage-2 checkpoint in stage 1");
  if (train) config_.train = *train;
  config_.model.validate();
  config_.train.validate();
  check_corpus(config_.model, corpus_);
  model_ = std::make_unique<Model>(model_from_checkpoint(checkpoint));

  for (RngStream* stream : {&mask_rng_, &dropout_rng_, &chunk_rng_}) {
    const auto it = std::find_if(checkpoint.rng.begin(), checkpoint.rng.end(),
                                 [&](const RngRecord& r) { return r.stream_id == stream->stream_id(); });
    if (it == checkpoint.rng.end()) throw FormatError("checkpoint lacks rng stream '" + stream->stream_id() + "'");
    stream->set_counter(it->counter);
  }

  if (checkpoint.stage == stage) {
    step_ = checkpoint.step;
    model_opt_ = checkpoint.model_optimizer;
    if (stage == 2) {
      RngStream init(seed_, "disc-init");
      disc_ = std::make_unique<Discriminator>(config_.model.n_mels, config_.train, init);
      apply_parameters(checkpoint.discriminator, disc_->parameters());
      disc_opt_ = checkpoint.discriminator_optimizer;
    }
  } else {
    init_stage2();
  }
}

void Trainer::init_stage2() {
  stage_ = 2;
  step_ = 0;
  model_opt_ = {};
  disc_opt_ = {};
  RngStream init(seed_, "disc-init");
  disc_ = std::make_unique<Discriminator>(config_.model.n_mels, config_.train, init);
  const auto short_utts = std::count_if(corpus_.utterances.begin(), corpus_.utterances.end(), [&](const Utterance& u) {
    return u.mel.dim(0) < config_.train.disc_chunk;
  });
  if (short_utts > 0) {
    logging::info(std::to_string(short_utts) + " utterances are shorter than " + std::to_string(config_.train.disc_chunk) +
              " frames; their critic chunks are zero padded");
  }
}

double Trainer::next_lr() const {
  if (stage_ == 2) return config_.train.stage2_lr_model;
  const auto& t = config_.train;
  return poly_lr(step_ + 1, PolySchedule{t.stage1_lr, t.stage1_power, t.stage1_warmup, t.stage1_total});
}

std::vector<std::size_t> Trainer::batch_indices() const {
  // Sample k of step s is position g = s * B + k of an endless sequence of
  // epochs, each a seeded permutation of the corpus.
  const std::size_t n = corpus_.utterances.size();
  const std::size_t batch = config_.train.batch_size;
  std::vector<std::size_t> out;
  std::uint64_t cached_epoch = ~0ULL;
  std::vector<std::size_t> perm(n);
  for (std::size_t k = 0; k < batch; ++k) {
    const std::uint64_t g = step_ * batch + k;
    const std::uint64_t epoch = g / n;
    if (epoch != cached_epoch) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      RngStream rng(seed_, "epoch:" + std::to_string(epoch));
      for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_int(i)]);
      cached_epoch = epoch;
    }
    out.push_back(perm[g % n]);
  }
  return out;
}

std::vector<Tensor> Trainer::model_tensors() const {
  std::vector<Tensor> out;
  for (auto& p : model_->parameters()) out.push_back(p.tensor);
  return out;
}

std::vector<Tensor> Trainer::disc_tensors() const {
  std::vector<Tensor> out;
  for (auto& p : disc_->parameters()) out.push_back(p.tensor);
  return out;
}

Trainer::Forward Trainer::forward(const Utterance& utt) {
  const Model& model = *model_;
  const TrainConfig& cfg = config_.train;
  const auto global = model.encode_global_factors(utt.reference);
  const Tensor encoded = model.encode_phonemes(utt.text, global);

  std::optional<AlignmentMatrix> alignment;
  if (cfg.duration_source == DurationSource::Aligner) {
    alignment = soft_alignment(utt.mel, model.aligner_embedding(utt.text), model.params().aligner);
  }
  const Tensor* log_probs = alignment ? &alignment->log_probs : nullptr;
  const ProsodyTrack teacher = teacher_prosody(model, utt, cfg.duration_source, log_probs);

  const MaskSpec mask = sample_prosody_mask(utt.text, mask_rng_, cfg);
  const ProsodyContext context = ProsodyContext::from_track(
      teacher, mask.apply ? mask.phoneme_mask : std::vector<bool>(teacher.size(), false));

  const ForwardMode mode{true, &dropout_rng_};
  const auto adapted = model.variance_adapt(encoded, {AdaptMode::Train, &context, &teacher, nullptr}, mode);
  Forward out;
  out.mel = model.decode_mel(adapted.frames, global);
  out.loss = stage1_loss({out.mel, adapted.log_duration, adapted.pitch, adapted.energy},
                         {utt.mel, teacher.duration, teacher.pitch, teacher.energy}, log_probs, cfg);
  return out;
}

StepMetrics Trainer::step() {
  const auto start = std::chrono::steady_clock::now();
  StepMetrics m = stage_ == 1 ? stage1_step() : stage2_step();
  m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return m;
}

namespace {

void add_parts(Stage1LossBreakdown& acc, const Stage1LossBreakdown& part, double weight) {
  acc.mel_mse += weight * part.mel_mse;
  acc.dur_mse += weight * part.dur_mse;
  acc.pitch_mse += weight * part.pitch_mse;
  acc.energy_mse += weight * part.energy_mse;
  acc.align_loss += weight * part.align_loss;
  acc.total += weight * part.total;
}

}  // namespace

StepMetrics Trainer::stage1_step() {
  const auto indices = batch_indices();
  const double weight = 1.0 / static_cast<double>(indices.size());
  StepMetrics m;
  m.stage = 1;
  m.lr = next_lr();

  Tensor loss;
  for (std::size_t i : indices) {
    Forward f = forward(corpus_.utterances[i]);
    add_parts(m.stage1, f.loss.parts, weight);
    loss = accumulate(loss, f.loss.total);
  }
  loss = scale(loss, weight);
  m.total = loss.item();
  backward(loss);

  auto params = model_tensors();
  m.grad_norm = clip_grad_norm(params, config_.train.grad_clip);
  try {
    lamb_step(params, model_opt_, m.lr, LambConfig::from(config_.train));
  } catch (...) {
    zero_grads(params);
    throw;
  }
  zero_grads(params);
  m.step = ++step_;
  return m;
}

StepMetrics Trainer::stage2_step() {
  const auto indices = batch_indices();
  const double weight = 1.0 / static_cast<double>(indices.size());
  const TrainConfig& cfg = config_.train;
  const Discriminator& disc = *disc_;
  const std::size_t chunk = disc.chunk_frames();
  StepMetrics m;
  m.stage = 2;
  m.lr = next_lr();

  std::vector<Forward> fwd;
  std::vector<std::size_t> starts;
  for (std::size_t i : indices) {
    fwd.push_back(forward(corpus_.utterances[i]));
    starts.push_back(sample_chunk_start(corpus_.utterances[i].mel.dim(0), chunk, chunk_rng_));
  }

  auto critic = disc_tensors();
  auto params = model_tensors();
  try {
    Tensor d_loss;
    for (std::size_t b = 0; b < indices.size(); ++b) {
      const Tensor real = take_chunk(corpus_.utterances[indices[b]].mel, starts[b], chunk);
      const Tensor fake = take_chunk(fwd[b].mel.detach(), starts[b], chunk);
      d_loss = accumulate(d_loss, hinge_d_loss(disc(real).score, disc(fake).score));
    }
    d_loss = scale(d_loss, weight);
    m.disc = d_loss.item();
    backward(d_loss);
    clip_grad_norm(critic, cfg.grad_clip);
    lamb_step(critic, disc_opt_, cfg.stage2_lr_disc, LambConfig::from(cfg));
    zero_grads(critic);

    Tensor loss;
    for (std::size_t b = 0; b < indices.size(); ++b) {
      const Utterance& utt = corpus_.utterances[indices[b]];
      std::vector<Tensor> real_features;
      {
        NoGradGuard guard;
        real_features = disc(take_chunk(utt.mel, starts[b], chunk)).features;
      }
      const auto fake_features = disc(take_chunk(fwd[b].mel, starts[b], chunk)).features;
      const Tensor feat = feature_matching_loss(real_features, fake_features);
      add_parts(m.stage1, fwd[b].loss.parts, weight);
      m.feat += weight * feat.item();
      loss = accumulate(loss, stage2_loss(fwd[b].loss.total, feat, cfg.lambda_feat));
    }
    loss = scale(loss, weight);
    m.total = loss.item();
    backward(loss);
    zero_grads(critic);
    m.grad_norm = clip_grad_norm(params, cfg.grad_clip);
    lamb_step(params, model_opt_, m.lr, LambConfig::from(cfg));
    zero_grads(params);
  } catch (...) {
    zero_grads(critic);
    zero_grads(params);
    throw;
  }
  m.step = ++step_;
  return m;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.config = config_;
  c.stage = stage_;
  c.step = step_;
  c.seed = seed_;
  for (const RngStream* stream : {&mask_rng_, &dropout_rng_, &chunk_rng_}) {
    c.rng.push_back({stream->stream_id(), stream->counter()});
  }
  c.model = model_->parameters();
  c.model_optimizer = model_opt_;
  if (disc_) {
    c.discriminator = disc_->parameters();
    c.discriminator_optimizer = disc_opt_;
  }
  return c;
}

std::vector<StepMetrics> run_training(Trainer& trainer, const RunOptions& options) {
  std::vector<StepMetrics> history;
  const std::uint64_t every = trainer.config().train.checkpoint_every;
  if (options.checkpoint_dir) std::filesystem::create_directories(*options.checkpoint_dir);
  for (std::uint64_t i = 0; i < options.steps; ++i) {
    StepMetrics m = trainer.step();
    if (options.metrics) *options.metrics << m.format(options.include_wall) << '\n' << std::flush;
    if (options.timing) *options.timing << "step=" << m.step << " wall=" << m.wall_seconds << '\n' << std::flush;
    logging::debug(m.format());
    if (options.checkpoint_dir && every > 0 && trainer.steps_done() % every == 0) {
      char name[48];
      std::snprintf(name, sizeof(name), "stage%d_step%08llu.ckpt", trainer.stage(),
                    static_cast<unsigned long long>(trainer.steps_done()));
      save_checkpoint(*options.checkpoint_dir / name, trainer.checkpoint());
    }
    history.push_back(m);
  }
  if (options.checkpoint_dir) save_checkpoint(*options.checkpoint_dir / "last.ckpt", trainer.checkpoint());
  return history;
}

}  // namespace retts

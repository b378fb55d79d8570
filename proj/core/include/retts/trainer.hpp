#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "retts/checkpoint.hpp"
#include "retts/config.hpp"
#include "retts/corpus.hpp"
#include "retts/discriminator.hpp"
#include "retts/lamb.hpp"
#include "retts/losses.hpp"
#include "retts/model.hpp"
#include "retts/rng.hpp"

namespace retts {

/// One metrics-log record.
struct StepMetrics {
  std::uint64_t step = 0;  // 1-based index of the step just taken
  int stage = 1;
  double lr = 0.0;
  Stage1LossBreakdown stage1;  // batch means
  double feat = 0.0;           // stage 2 only
  double disc = 0.0;           // stage 2 only, hinge loss before the critic update
  double total = 0.0;          // objective the model step minimized
  double grad_norm = 0.0;      // model gradient norm before clipping
  double wall_seconds = 0.0;

  /// `key=value` fields separated by spaces. Wall time is left out when
  /// include_wall is false, which makes logs comparable across runs.
  std::string format(bool include_wall = true) const;
};

/// Throws InputError when the corpus cannot feed a model of this shape.
void check_corpus(const ModelConfig& model, const Corpus& corpus);

/// Teacher prosody for an utterance: oracle values, or aligner durations with
/// pitch and energy pooled over them.
ProsodyTrack teacher_prosody(const Model& model, const Utterance& utt, DurationSource source,
                             const Tensor* log_probs);

/// Mean mel MSE over `corpus` with teacher forcing, no dropout and fully
/// visible prosody context.
double evaluate_mel_mse(const Model& model, const Corpus& corpus, DurationSource source);

class Trainer {
 public:
  /// Fresh stage-1 run.
  Trainer(RunConfig config, Corpus corpus, std::uint64_t seed);
  /// Continues `checkpoint` in `stage`. A stage-1 checkpoint may start stage 2;
  /// a stage-2 checkpoint cannot go back to stage 1. `train`, when given,
  /// replaces the stored optimization settings.
  Trainer(const Checkpoint& checkpoint, Corpus corpus, int stage, std::optional<TrainConfig> train = {});

  StepMetrics step();
  Checkpoint checkpoint() const;

  const Model& model() const { return *model_; }
  const RunConfig& config() const { return config_; }
  int stage() const { return stage_; }
  std::uint64_t steps_done() const { return step_; }
  /// Learning rate of the model update the next step() takes.
  double next_lr() const;

 private:
  struct Forward;

  std::vector<std::size_t> batch_indices() const;
  Forward forward(const Utterance& utt);
  StepMetrics stage1_step();
  StepMetrics stage2_step();
  void init_stage2();
  std::vector<Tensor> model_tensors() const;
  std::vector<Tensor> disc_tensors() const;

  RunConfig config_;
  Corpus corpus_;
  std::uint64_t seed_;
  int stage_ = 1;
  std::uint64_t step_ = 0;
  std::unique_ptr<Model> model_;
  std::unique_ptr<Discriminator> disc_;
  LambState model_opt_;
  LambState disc_opt_;
  RngStream mask_rng_;
  RngStream dropout_rng_;
  RngStream chunk_rng_;
};

struct RunOptions {
  std::uint64_t steps = 0;
  std::ostream* metrics = nullptr;  // one formatted StepMetrics line per step
  bool include_wall = true;
  std::optional<std::filesystem::path> checkpoint_dir;  // periodic and final checkpoints
  std::ostream* timing = nullptr;   // "step=N wall=S" per step
};

/// Runs `steps` steps, writing metrics and checkpoints as configured.
std::vector<StepMetrics> run_training(Trainer& trainer, const RunOptions& options);

}  // namespace retts

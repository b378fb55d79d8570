// retts: synthetic corpus generation, training, synthesis and word insertion.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "retts/checkpoint.hpp"
#include "retts/config.hpp"
#include "retts/corpus.hpp"
#include "retts/error.hpp"
#include "retts/gradcheck_suite.hpp"
#include "retts/inference.hpp"
#include "retts/log.hpp"
#include "retts/matrix_io.hpp"
#include "retts/trainer.hpp"

namespace fs = std::filesystem;
using namespace retts;

namespace {

constexpr int kUsageError = 2;

struct Options {
  std::string config;
  std::string data;
  std::string out;
  std::uint64_t seed = 1;
  int stage = 1;
  std::optional<std::uint64_t> steps;
  std::string init;
  std::string model;
  std::string utt;
  std::string ref;
  std::size_t at_word = 0;
  std::string words;
  std::string text;
  std::size_t speakers = 4;
  std::size_t utts_per_speaker = 16;
};

RunConfig run_config(const Options& o) { return o.config.empty() ? RunConfig{} : load_config(o.config); }

ReferenceFeature reference_from(const fs::path& path) {
  fs::path feat = path;
  if (feat.extension() == ".mel") feat.replace_extension(".feat");
  return ReferenceFeature{load_matrix(feat)};
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

int cmd_gen_data(const Options& o) {
  const RunConfig cfg = run_config(o);
  CorpusSpec spec;
  spec.n_speakers = o.speakers;
  spec.utts_per_speaker = o.utts_per_speaker;
  spec.seed = o.seed;
  spec.n_mels = cfg.model.n_mels;
  spec.phoneme_vocab = cfg.model.phoneme_vocab;
  spec.feature_dim = cfg.model.feature_dim;
  const Corpus corpus = gen_corpus(spec);
  write_corpus(corpus, o.out);
  logging::info("wrote " + std::to_string(corpus.utterances.size()) + " utterances to " + o.out);
  return 0;
}

int cmd_train(const Options& o) {
  if (o.stage != 1 && o.stage != 2) throw InputError("--stage must be 1 or 2");
  if (o.stage == 2 && o.init.empty()) throw InputError("stage 2 needs a stage-1 checkpoint via --init");
  Corpus corpus = read_corpus(o.data);

  std::unique_ptr<Trainer> trainer;
  bool resumed = false;
  if (o.init.empty()) {
    trainer = std::make_unique<Trainer>(run_config(o), std::move(corpus), o.seed);
  } else {
    const Checkpoint ckpt = load_checkpoint(o.init);
    std::optional<TrainConfig> train;
    if (!o.config.empty()) {
      const RunConfig cfg = load_config(o.config);
      check_compatible(ckpt.config.model, cfg.model);
      train = cfg.train;
    }
    resumed = ckpt.stage == o.stage;
    trainer = std::make_unique<Trainer>(ckpt, std::move(corpus), o.stage, train);
  }

  const auto& t = trainer->config().train;
  RunOptions run;
  run.steps = o.steps.value_or(o.stage == 1 ? t.stage1_total : t.stage2_steps);
  if (resumed) run.steps = run.steps > trainer->steps_done() ? run.steps - trainer->steps_done() : 0;
  run.checkpoint_dir = fs::path(o.out);
  fs::create_directories(o.out);
  std::ofstream metrics(fs::path(o.out) / "metrics.log", resumed ? std::ios::app : std::ios::trunc);
  if (!metrics) throw IoError("cannot open " + (fs::path(o.out) / "metrics.log").string());
  run.metrics = &metrics;
  // wall time goes to its own file so resumed and unbroken logs compare equal
  run.include_wall = false;
  std::ofstream timing(fs::path(o.out) / "timing.log", resumed ? std::ios::app : std::ios::trunc);
  run.timing = &timing;
  logging::info("stage " + std::to_string(o.stage) + ": " + std::to_string(run.steps) + " steps from step " +
                std::to_string(trainer->steps_done()));
  const auto history = run_training(*trainer, run);
  if (!history.empty()) logging::info("final " + history.back().format());
  return 0;
}

int cmd_synth(const Options& o) {
  const Checkpoint ckpt = load_checkpoint(o.model);
  const Model model = model_from_checkpoint(ckpt);
  const Tensor mel = generate_full(model, parse_phonemes(o.text), reference_from(o.ref));
  save_matrix(o.out, mel);
  logging::info("wrote " + std::to_string(mel.dim(0)) + " frames to " + o.out);
  return 0;
}

int cmd_insert(const Options& o) {
  const Checkpoint ckpt = load_checkpoint(o.model);
  const Model model = model_from_checkpoint(ckpt);
  const Utterance utt = read_utterance(o.utt);
  const ReferenceFeature reference = o.ref.empty() ? utt.reference : reference_from(o.ref);

  const PhonemeSequence inserted = parse_phonemes(o.words);
  std::vector<std::vector<int>> words(inserted.word_count());
  for (std::size_t i = 0; i < inserted.size(); ++i) {
    words[static_cast<std::size_t>(inserted.word_index[i])].push_back(inserted.ids[i]);
  }
  const auto request = make_insertion(utt.mel, utt.text, utt.prosody, reference, o.at_word, words);
  const auto result = insert_words(model, request);

  const fs::path out(o.out);
  fs::create_directories(out);
  if (result.segment.defined()) save_matrix(out / "segment.mel", result.segment);
  save_matrix(out / "full.mel", result.full_mel);
  write_text(out / "plan.txt", result.plan.format());
  std::cout << result.plan.format();
  return 0;
}

int cmd_gradcheck(const Options& o) {
  const ModelConfig cfg = o.config.empty() ? gradcheck_toy_config() : load_config(o.config).model;
  bool ok = true;
  for (const auto& r : run_gradcheck_suite(cfg, o.seed)) {
    const bool pass = r.max_relative_error < 1e-4;
    ok = ok && pass;
    std::printf("%-28s max_rel_error=%.3e checked=%zu %s\n", r.name.c_str(), r.max_relative_error, r.checked,
                pass ? "ok" : "FAIL");
  }
  return ok ? 0 : 1;
}

int cmd_eval_speaker_sim(const Options& o) {
  const Model model = model_from_checkpoint(load_checkpoint(o.model));
  const Corpus corpus = read_corpus(o.data);
  check_corpus(model.config(), corpus);
  const auto sim = speaker_similarity(model, corpus);
  std::printf("within_mean=%.6f across_mean=%.6f separated_fraction=%.6f triples=%zu\n", sim.within_mean,
              sim.across_mean, sim.separated_fraction, sim.triples);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  logging::init_from_env();
  Options o;
  CLI::App app{"Speech insertion TTS on a synthetic corpus"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic corpus");
  gen->add_option("--out", o.out, "Output directory")->required();
  gen->add_option("--seed", o.seed, "Corpus seed");
  gen->add_option("--config", o.config, "Config giving n_mels, phoneme_vocab and feature_dim");
  gen->add_option("--speakers", o.speakers, "Number of speakers")->check(CLI::PositiveNumber);
  gen->add_option("--utts-per-speaker", o.utts_per_speaker, "Utterances per speaker")->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "Train stage 1 or stage 2");
  train->add_option("--config", o.config, "Config file");
  train->add_option("--data", o.data, "Corpus directory")->required();
  train->add_option("--out", o.out, "Run directory for metrics.log and checkpoints")->required();
  train->add_option("--seed", o.seed, "Seed for a fresh run");
  train->add_option("--stage", o.stage, "1 or 2");
  train->add_option("--steps", o.steps, "Total steps of this stage (default from config)");
  train->add_option("--init", o.init, "Checkpoint to resume or to start stage 2 from");

  auto* synth = app.add_subcommand("synth", "Zero-shot full-sentence synthesis");
  synth->add_option("--model", o.model, "Checkpoint")->required();
  synth->add_option("--text", o.text, "Phoneme ids: words separated by spaces, phonemes by commas")->required();
  synth->add_option("--ref", o.ref, "Reference feature (.feat, or a .mel with a .feat sibling)")->required();
  synth->add_option("--out", o.out, "Output mel file")->required();

  auto* insert = app.add_subcommand("insert", "Insert words into an utterance");
  insert->add_option("--model", o.model, "Checkpoint")->required();
  insert->add_option("--utt", o.utt, "Utterance .mel with .phon, .prosody and .feat siblings")->required();
  insert->add_option("--at-word", o.at_word, "Index the first inserted word takes in the new sentence")->required();
  insert->add_option("--words", o.words, "Words to insert, same syntax as --text")->required();
  insert->add_option("--ref", o.ref, "Reference feature for the global tokens (default: the utterance)");
  insert->add_option("--out", o.out, "Output directory for segment.mel, full.mel and plan.txt")->required();

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  grad->add_option("--config", o.config, "Config whose model extents are checked (default: toy)");
  grad->add_option("--seed", o.seed, "Seed for parameters and inputs");

  auto* sim = app.add_subcommand("eval-speaker-sim", "Speaker separation of pooled global tokens");
  sim->add_option("--model", o.model, "Checkpoint")->required();
  sim->add_option("--data", o.data, "Corpus directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kUsageError;
  }

  try {
    if (*gen) return cmd_gen_data(o);
    if (*train) return cmd_train(o);
    if (*synth) return cmd_synth(o);
    if (*insert) return cmd_insert(o);
    if (*grad) return cmd_gradcheck(o);
    if (*sim) return cmd_eval_speaker_sim(o);
  } catch (const std::exception& e) {
    logging::error(e.what());
    return 1;
  }
  return kUsageError;
}

#include <benchmark/benchmark.h>

#include "retts/alignment.hpp"
#include "retts/config.hpp"
#include "retts/corpus.hpp"
#include "retts/layers.hpp"
#include "retts/ops.hpp"
#include "retts/trainer.hpp"

using namespace retts;

static void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  RngStream rng(1, "bench");
  const Tensor a = rng_normal(rng, {n, n}), b = rng_normal(rng, {n, n});
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128);

static void BM_Attention(benchmark::State& state) {
  const auto t = static_cast<std::size_t>(state.range(0));
  RngStream rng(2, "bench");
  const auto params = MultiHeadAttentionParams::init(32, 32, 32, 32, 2, rng);
  const Tensor x = rng_normal(rng, {t, 32});
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(multi_head_attention(x, x, x, nullptr, params));
}
BENCHMARK(BM_Attention)->Arg(64)->Arg(256);

static void BM_ForwardSum(benchmark::State& state) {
  const auto t = static_cast<std::size_t>(state.range(0));
  RngStream rng(3, "bench");
  Tensor x = rng_normal(rng, {t, t / 4}).set_requires_grad(true);
  for (auto _ : state) {
    Tensor loss = forward_sum_loss(log_softmax_lastdim(x));
    backward(loss);
    x.zero_grad();
  }
}
BENCHMARK(BM_ForwardSum)->Arg(64)->Arg(256);

static void BM_Stage1Step(benchmark::State& state) {
  const RunConfig cfg = parse_config(R"(
tokens=8
d_model=32
ffn_hidden=64
gfe_layers=2
encoder_layers=2
decoder_layers=2
gfe_channels=32
gfe_ffn_hidden=64
predictor_channels=32
align_dim=16
stage1_lr=0.02
stage1_warmup=200
stage1_total=100000
)");
  CorpusSpec spec;
  spec.n_speakers = 2;
  spec.utts_per_speaker = 4;
  Trainer trainer(cfg, gen_corpus(spec), 1);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step());
}
BENCHMARK(BM_Stage1Step)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();

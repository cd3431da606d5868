#include <benchmark/benchmark.h>

#include "semcom/checkpoint.hpp"
#include "semcom/data.hpp"
#include "semcom/decoder.hpp"
#include "semcom/evaluation.hpp"
#include "semcom/losses.hpp"
#include "semcom/model.hpp"

using namespace semcom;

namespace {

void BM_Conv2d(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto s = static_cast<std::size_t>(state.range(1));
  Rng rng(1);
  const Tensor x = uniform({8, c, s, s}, 0, 1, rng);
  const Tensor k = uniform({c, c, 3, 3}, -0.1, 0.1, rng);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, k, 1, 1, 1));
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_Conv2d)->Args({16, 32})->Args({32, 64})->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  Rng rng(2);
  Tensor x = uniform({8, 32, 32, 32}, 0, 1, rng, true);
  Tensor k = uniform({32, 32, 3, 3}, -0.1, 0.1, rng, true);
  for (auto _ : state) {
    x.zero_grad();
    k.zero_grad();
    backward(sum(conv2d(x, k, 1, 1, 1)));
  }
}
BENCHMARK(BM_Conv2dBackward)->Unit(benchmark::kMillisecond);

void BM_LstmStep(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  const LSTMCellParams p = LSTMCellParams::init(hidden, hidden, rng);
  const Tensor x = uniform({1, hidden}, -1, 1, rng);
  LSTMState s = LSTMState::zeros(1, hidden);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(lstm_cell_step(x, s, p));
}
BENCHMARK(BM_LstmStep)->Arg(5)->Arg(100);

void BM_DecodeSequence(benchmark::State& state) {
  Rng rng(4);
  DecoderConfig dc;
  dc.dropout = 0;
  const SemanticDecoder dec = SemanticDecoder::build(dc, 64 * 64, rng);
  const Tensor z = uniform({4, 64 * 64}, 0, 0.01, rng);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(dec.decode_counts(z, false, rng));
}
BENCHMARK(BM_DecodeSequence)->Unit(benchmark::kMicrosecond);

FrameSet frames64(std::size_t n) {
  SyntheticConfig sc;
  sc.frames = n;
  return to_frame_set(synth_generate(sc), sc.blob_sigma);
}

void BM_PipelineForward(benchmark::State& state) {
  const SemComModel model = SemComModel::build(ModelConfig{}, 5);
  const FrameSet batch = frames64(8);
  Rng rng(6);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(batch.images, false, rng).counts);
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_PipelineForward)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  TrainConfig tc;
  Trainer trainer(SemComModel::build(ModelConfig{}, 7), tc);
  const FrameSet batch = frames64(8);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.train_step(batch));
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_GroundTruth(benchmark::State& state) {
  SyntheticConfig sc;
  sc.frames = 1;
  sc.count_min = sc.count_max = 20;
  const auto frame = synth_generate(sc).front();
  for (auto _ : state) benchmark::DoNotOptimize(make_gt_density(frame.dots, 64, 64, 4.0));
}
BENCHMARK(BM_GroundTruth);

void BM_DensityPayload(benchmark::State& state) {
  SyntheticConfig sc;
  sc.frames = 1;
  const auto frame = synth_generate(sc).front();
  const DensityMap map = make_gt_density(frame.dots, 64, 64, 4.0);
  for (auto _ : state) benchmark::DoNotOptimize(encode_density_payload(map));
}
BENCHMARK(BM_DensityPayload);

void BM_CheckpointRoundTrip(benchmark::State& state) {
  const Trainer trainer(SemComModel::build(micro_model_config(), 8), TrainConfig{});
  for (auto _ : state) benchmark::DoNotOptimize(checkpoint_from_bytes(checkpoint_bytes(trainer)));
}
BENCHMARK(BM_CheckpointRoundTrip)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include <vector>

#include "cuebias/dataset.hpp"
#include "cuebias/experiment.hpp"
#include "cuebias/mlp.hpp"

namespace {

using namespace cuebias;

LabeledSet sample_set(DatasetKind kind, int per_class) {
  GeneratorConfig cfg;
  cfg.samples_per_class = per_class;
  const auto d = build_dataset(kind, 7, cfg);
  return LabeledSet::from_records(d.samples);
}

void BM_MakeSample(benchmark::State& state) {
  const PatternTables tables;
  std::uint32_t i = 0;
  for (auto _ : state) {
    auto rng = sample_stream(DatasetKind::BothCues, 1, i++);
    benchmark::DoNotOptimize(make_sample(DatasetKind::BothCues, ClassLabel::II, false, rng, tables));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_MakeSample);

void BM_BuildDataset(benchmark::State& state) {
  GeneratorConfig cfg;
  cfg.samples_per_class = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_dataset(DatasetKind::DistBothCues, 3, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0) * kNumClasses);
}
BENCHMARK(BM_BuildDataset)->Arg(1000)->Unit(benchmark::kMillisecond);

// One minibatch forward and backward pass at the given hidden width.
void BM_ForwardBackward(benchmark::State& state) {
  const int width = static_cast<int>(state.range(0));
  const auto data = sample_set(DatasetKind::BothCues, 11);
  BinaryBatch batch;
  std::vector<std::uint8_t> labels;
  for (std::size_t r = 0; r < 32; ++r) {
    batch.add_row(data.inputs.row(r));
    labels.push_back(data.labels[r]);
  }
  RngStream rng(1, 0);
  auto params = init_params<float>(mlp_config(1, width), rng);
  for (auto _ : state) {
    const auto cache = forward(params, batch);
    const auto grads = backward(params, cache, labels);
    sgd_step(params, grads, 1e-3);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_ForwardBackward)->Arg(10)->Arg(100)->Arg(500);

void BM_Epoch(benchmark::State& state) {
  const auto data = sample_set(DatasetKind::BothCues, 1000);
  TrainConfig tc;
  tc.max_epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train(data, mlp_config(1, static_cast<int>(state.range(0))), tc));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
}
BENCHMARK(BM_Epoch)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_Evaluate(benchmark::State& state) {
  const auto data = sample_set(DatasetKind::BothCues, 1000);
  RngStream rng(2, 0);
  const auto params = init_params<float>(mlp_config(1, 100), rng);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(params, data));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
}
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();

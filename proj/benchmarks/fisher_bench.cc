#include <benchmark/benchmark.h>

#include <random>

#include "whalefl/fisher.h"

namespace nn = whalefl::nn;
namespace fisher = whalefl::fisher;

namespace {

void BM_FisherTrace(benchmark::State& state) {
  const auto mode = static_cast<fisher::FisherMode>(state.range(0));
  const auto m = nn::init_model(nn::Arch{{784, 128, 10}}, 1);
  nn::Batch b{nn::Matrix::Random(32, 784), {}};
  for (int i = 0; i < 32; ++i) b.labels.push_back(i % 10);
  std::mt19937_64 rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(fisher::batch_fisher_trace(m, b, mode, rng));
  state.SetLabel(fisher::to_string(mode));
}
BENCHMARK(BM_FisherTrace)->DenseRange(0, 2);

void BM_TrainingEfficiency(benchmark::State& state) {
  fisher::FisherHistory h(10, 32);
  for (int r = 0; r < 10; ++r) h.record_round(r, std::vector<double>(32, 1.0 + r));
  for (auto _ : state) benchmark::DoNotOptimize(fisher::training_efficiency(h, 10, 10));
}
BENCHMARK(BM_TrainingEfficiency);

}  // namespace

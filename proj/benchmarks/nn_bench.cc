#include <benchmark/benchmark.h>

#include "whalefl/nn.h"

namespace nn = whalefl::nn;

namespace {

nn::Batch random_batch(int n, int d, int k) {
  nn::Batch b{nn::Matrix::Random(n, d), {}};
  for (int i = 0; i < n; ++i) b.labels.push_back(i % k);
  return b;
}

void BM_Forward(benchmark::State& state) {
  const int hidden = static_cast<int>(state.range(0));
  const auto m = nn::init_model(nn::Arch{{784, hidden, 10}}, 1);
  const auto b = random_batch(32, 784, 10);
  for (auto _ : state) benchmark::DoNotOptimize(nn::forward(m, b.inputs));
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_Forward)->Arg(8)->Arg(32)->Arg(128);

void BM_LossAndGrad(benchmark::State& state) {
  const int hidden = static_cast<int>(state.range(0));
  const auto m = nn::init_model(nn::Arch{{784, hidden, 10}}, 1);
  const auto b = random_batch(32, 784, 10);
  for (auto _ : state) benchmark::DoNotOptimize(nn::loss_and_grad(m, b));
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_LossAndGrad)->Arg(8)->Arg(32)->Arg(128);

void BM_PerExampleNorms(benchmark::State& state) {
  const auto m = nn::init_model(nn::Arch{{784, 128, 10}}, 1);
  const auto b = random_batch(32, 784, 10);
  const auto cache = nn::forward_cached(m, b.inputs);
  for (auto _ : state) benchmark::DoNotOptimize(nn::per_example_grad_sq_norms(m, cache, b.labels));
}
BENCHMARK(BM_PerExampleNorms);

}  // namespace

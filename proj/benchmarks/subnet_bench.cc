#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "whalefl/subnet.h"

namespace nn = whalefl::nn;
namespace subnet = whalefl::subnet;

namespace {

void BM_Extract(benchmark::State& state) {
  const nn::Arch arch{{784, 128, 10}};
  const auto g = nn::init_model(arch, 1);
  const auto mask = subnet::width_mask(arch, static_cast<int>(state.range(0)), subnet::LevelSpec{});
  for (auto _ : state) benchmark::DoNotOptimize(subnet::extract(g, mask));
}
BENCHMARK(BM_Extract)->DenseRange(1, 5);

// 20 clients spread over all five levels, mask kind from the argument.
void BM_Aggregate(benchmark::State& state) {
  const nn::Arch arch{{784, 128, 10}};
  const auto g = nn::init_model(arch, 1);
  const auto kind = static_cast<subnet::MaskKind>(state.range(0));
  std::mt19937_64 rng(2);
  std::vector<subnet::SubModel> ups;
  for (int c = 0; c < 20; ++c)
    ups.push_back(subnet::extract(g, subnet::make_mask(kind, arch, 1 + c % 5, subnet::LevelSpec{}, c, rng)));
  for (auto _ : state) benchmark::DoNotOptimize(subnet::aggregate(g, ups));
  state.SetLabel(subnet::to_string(kind));
}
BENCHMARK(BM_Aggregate)->DenseRange(0, 2);

}  // namespace

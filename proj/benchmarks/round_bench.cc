#include <benchmark/benchmark.h>

#include "whalefl/harness.h"

namespace h = whalefl::harness;

namespace {

h::ExperimentConfig blobs(h::Strategy s) {
  h::ExperimentConfig c;
  c.model.hidden = {64};
  c.data.source = h::DataSource::kBlobs;
  c.data.sigma = 5;
  c.fleet.max_level = {1, 1, 2, 2, 3};
  c.scheduler.params.round_seconds = 0.001;
  c.scheduler.params.u_threshold = 100;
  c.train.strategy = s;
  c.train.lr = 0.2;
  c.train.rounds = 500;
  return c;
}

// One synchronous round over 20 clients on the 10-class blobs setup.
void BM_Round(benchmark::State& state) {
  const auto c = blobs(static_cast<h::Strategy>(state.range(0)));
  const auto env = h::build_environment(c);
  h::Simulation sim(c, env);
  for (auto _ : state) benchmark::DoNotOptimize(sim.run_round());
  state.SetLabel(h::to_string(c.train.strategy));
}
// Iteration count stays below the trace length.
BENCHMARK(BM_Round)->DenseRange(0, 4)->Iterations(200)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include "aimdq/engine.hpp"
#include "aimdq/model.hpp"

using namespace aimdq;

static ValidatedConfig reference() {
  SystemConfig c;
  c.lambda = 100.0;
  for (int i = 1; i <= 4; ++i)
    c.nodes.push_back(NodeParams{5.0 * i, 0.5, 5.0 * (i - 1), 7.5 * (2 * i - 1)});
  return validate_config(c);
}

static void BM_RunDeterministic(benchmark::State& state) {
  const ValidatedConfig cfg = reference();
  const long cycles = state.range(0);
  for (auto _ : state) {
    auto records = engine::run_deterministic(cfg, cycles);
    benchmark::DoNotOptimize(records.data());
  }
  state.SetItemsProcessed(state.iterations() * cycles);
}
BENCHMARK(BM_RunDeterministic)->Arg(30)->Arg(1000);

static void BM_RunOracle(benchmark::State& state) {
  const ValidatedConfig cfg = reference();
  for (auto _ : state) {
    auto records = engine::run_oracle(cfg, 1e-3, 5);
    benchmark::DoNotOptimize(records.data());
  }
}
BENCHMARK(BM_RunOracle);

static void BM_RunStochastic(benchmark::State& state) {
  const ValidatedConfig cfg = reference();
  for (auto _ : state) {
    auto run = engine::run_stochastic(cfg, {12345ULL, 50.0});
    benchmark::DoNotOptimize(run.cycles.data());
  }
}
BENCHMARK(BM_RunStochastic);

#include <benchmark/benchmark.h>

#include "aimdq/model.hpp"
#include "aimdq/rng.hpp"
#include "aimdq/spectral.hpp"

using namespace aimdq;

static SystemConfig random_system(std::size_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  SystemConfig c;
  c.lambda = 100.0;
  for (std::size_t i = 0; i < n; ++i)
    c.nodes.push_back(NodeParams{rng.uniform(0.01, 10.0), rng.uniform(0.01, 0.99), 0.0, 0.0});
  return c;
}

static void BM_SchurCheck(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto m = spectral::build_phi(validate_config(random_system(n, 99)));
  for (auto _ : state) {
    auto rep = spectral::schur_check(m);
    benchmark::DoNotOptimize(rep.spectral_radius);
  }
}
BENCHMARK(BM_SchurCheck)->Arg(4)->Arg(16)->Arg(64)->Arg(256);

static void BM_RankOneEigs(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto sym = spectral::symmetrize(spectral::build_phi(validate_config(random_system(n, 7))));
  for (auto _ : state) {
    auto eigs = spectral::rank_one_eigs(sym.d, -2.0, sym.z);
    benchmark::DoNotOptimize(eigs.eigenvalues.data());
  }
}
BENCHMARK(BM_RankOneEigs)->Arg(4)->Arg(64)->Arg(256);

#include <benchmark/benchmark.h>

#include "propattest/hybrid/hybrid.hpp"

namespace {

using namespace propattest;

void BM_EffectiveFa(benchmark::State& state) {
  const auto n_a = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state)
    for (std::uint64_t s = 0; s <= n_a; s += 1 + n_a / 16) benchmark::DoNotOptimize(hybrid::effective_fa(n_a / 10, n_a, s));
}
BENCHMARK(BM_EffectiveFa)->Arg(100)->Arg(10000);

}  // namespace

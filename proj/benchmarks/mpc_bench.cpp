#include <benchmark/benchmark.h>

#include <future>
#include <memory>

#include "propattest/common/rng.hpp"
#include "propattest/mpc/channel.hpp"
#include "propattest/mpc/dealer.hpp"
#include "propattest/mpc/party.hpp"
#include "propattest/mpc/share.hpp"

namespace {

using namespace propattest;
using namespace propattest::mpc;

template <typename Body>
void two_party(Body body) {
  auto [c1, c2] = make_channel_pair();
  auto dealer = std::make_shared<const Dealer>(7);
  LocalDealerSource d1(dealer, 1), d2(dealer, 2);
  Party p1(1, *c1, d1), p2(2, *c2, d2);
  auto f = std::async(std::launch::async, [&] { body(p2); });
  body(p1);
  f.get();
}

std::pair<SharePair, SharePair> operands(std::size_t n) {
  ChaChaRng rng(1);
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = static_cast<double>(i % 17) - 8.0;
    y[i] = 0.25 * static_cast<double>(i % 5);
  }
  return {share(x, kDefaultFracBits, rng), share(y, kDefaultFracBits, rng)};
}

void BM_Share(benchmark::State& state) {
  std::vector<double> x(static_cast<std::size_t>(state.range(0)), 1.5);
  ChaChaRng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(share(x, kDefaultFracBits, rng));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Share)->Arg(64)->Arg(4096);

void BM_Mul(benchmark::State& state) {
  auto [x, y] = operands(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state)
    two_party([&](Party& p) {
      const auto& a = p.id() == 1 ? x.first : x.second;
      const auto& b = p.id() == 1 ? y.first : y.second;
      benchmark::DoNotOptimize(truncate(p, mul(p, a, b), kDefaultFracBits));
    });
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Mul)->Arg(64)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_Compare(benchmark::State& state) {
  auto [x, y] = operands(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state)
    two_party([&](Party& p) {
      const auto& a = p.id() == 1 ? x.first : x.second;
      const auto& b = p.id() == 1 ? y.first : y.second;
      benchmark::DoNotOptimize(secure_compare(p, a, b));
    });
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Compare)->Arg(1)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

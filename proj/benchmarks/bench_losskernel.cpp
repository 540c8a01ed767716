#include <benchmark/benchmark.h>

#include "fixtures.hpp"
#include "rforge/losskernel.hpp"

namespace {

std::vector<rforge::TokenLossBatch> batches(std::size_t items, std::size_t tokens) {
  fixtures::Gen g(17);
  std::vector<rforge::TokenLossBatch> out;
  for (int i = 0; i < 64; ++i) out.push_back(g.loss_batch(items, items, tokens));
  return out;
}

void BM_LossMix(benchmark::State& state) {
  const auto data = batches(state.range(0), 128);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(rforge::loss_mix(data[i++ % data.size()]));
}
BENCHMARK(BM_LossMix)->Arg(2)->Arg(16)->Arg(64);

void BM_LossAlign(benchmark::State& state) {
  const auto data = batches(state.range(0), 128);
  const auto c = rforge::CoefficientPair::make(0.75);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(rforge::loss_align(data[i++ % data.size()], c));
}
BENCHMARK(BM_LossAlign)->Arg(2)->Arg(16)->Arg(64);

void BM_CoefficientSweep(benchmark::State& state) {
  const auto data = batches(16, 128);
  const auto grid = rforge::default_lambda_grid();
  for (auto _ : state) benchmark::DoNotOptimize(rforge::coefficient_sweep(data, grid));
}
BENCHMARK(BM_CoefficientSweep);

}  // namespace

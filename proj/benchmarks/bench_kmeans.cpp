#include <benchmark/benchmark.h>

#include "fixtures.hpp"
#include "rforge/curate.hpp"

namespace {

std::vector<rforge::EmbeddingVector> points(std::size_t n, std::size_t d) {
  fixtures::Gen g(23);
  std::vector<rforge::EmbeddingVector> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].sample_id = "p" + std::to_string(i);
    out[i].values.resize(d);
    for (auto& x : out[i].values) x = g.real(-1.0, 1.0);
  }
  return out;
}

void BM_KMeans(benchmark::State& state) {
  const auto data = points(state.range(0), state.range(1));
  const rforge::KMeansOptions opts{static_cast<std::size_t>(state.range(2)), 5};
  for (auto _ : state) benchmark::DoNotOptimize(rforge::kmeans(data, opts).inertia);
}
BENCHMARK(BM_KMeans)
    ->Args({1000, 64, 10})
    ->Args({2000, 256, 50})
    ->Args({2000, 16, 1000})
    ->Unit(benchmark::kMillisecond);

}  // namespace

#include <benchmark/benchmark.h>

#include "cot_fixtures.hpp"
#include "rforge/evalsuite.hpp"
#include "rforge/tokenizer.hpp"

namespace {

void BM_TokenCount(benchmark::State& state) {
  rforge::FallbackTokenizer tok;
  std::string text;
  for (int i = 0; i < 50; ++i) text += "这家餐厅的服务很好，but the food was cold. ";
  for (auto _ : state) benchmark::DoNotOptimize(tok.count(text));
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_TokenCount);

void BM_ParseCot(benchmark::State& state) {
  const auto cases = fixtures::cot_cases();
  std::vector<rforge::AnswerParser> parsers;
  for (const auto& c : cases) parsers.push_back(rforge::AnswerParser{c.labels});
  std::size_t i = 0;
  for (auto _ : state) {
    const auto k = i++ % cases.size();
    benchmark::DoNotOptimize(
        rforge::parse_answer(cases[k].output, rforge::InferenceMode::kCot, parsers[k]));
  }
}
BENCHMARK(BM_ParseCot);

}  // namespace

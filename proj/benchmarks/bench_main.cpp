#include <benchmark/benchmark.h>

#include "factum/classify.hpp"
#include "factum/ftrc.hpp"
#include "factum/oracle/naive_scores.hpp"
#include "factum/oracle/toy_transformer.hpp"
#include "factum/random.hpp"
#include "factum/scores.hpp"

using namespace factum;

namespace {

// Larger than the acceptance geometry so kernel costs dominate.
ReportTrace bench_trace(std::uint32_t layers, std::uint32_t heads, std::uint32_t hidden, std::uint32_t prompt) {
  const auto w = oracle::make_toy_weights({layers, heads, hidden, 64, 512, 1});
  oracle::TraceLayout layout;
  layout.prompt_length = prompt;
  layout.prompt_start = 1;
  const std::uint32_t positions[] = {prompt, prompt + 3, prompt + 7, prompt + 11};
  return oracle::toy_forward_trace(w, layout, positions, 2);
}

void BM_ComputeScores(benchmark::State& state) {
  const auto trace = bench_trace(8, 4, 64, static_cast<std::uint32_t>(state.range(0)));
  for (auto _ : state) {
    for (const auto& rec : trace.citations) benchmark::DoNotOptimize(compute_scores(rec, trace));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(trace.citations.size()));
}
BENCHMARK(BM_ComputeScores)->Arg(32)->Arg(128);

void BM_NaiveScores(benchmark::State& state) {
  const auto trace = bench_trace(8, 4, 64, static_cast<std::uint32_t>(state.range(0)));
  for (auto _ : state) {
    for (const auto& rec : trace.citations) benchmark::DoNotOptimize(oracle::naive_scores(rec, trace));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(trace.citations.size()));
}
BENCHMARK(BM_NaiveScores)->Arg(32)->Arg(128);

void BM_FtrcEncode(benchmark::State& state) {
  const auto trace = bench_trace(8, 4, 64, 128);
  std::size_t bytes = 0;
  for (auto _ : state) {
    const auto out = ftrc::encode_report(trace);
    bytes = out.size();
    benchmark::DoNotOptimize(out.data());
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes));
}
BENCHMARK(BM_FtrcEncode);

void BM_FtrcDecode(benchmark::State& state) {
  const auto bytes = ftrc::encode_report(bench_trace(8, 4, 64, 128));
  for (auto _ : state) benchmark::DoNotOptimize(ftrc::decode_report(bytes));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_FtrcDecode);

void BM_TrainLogreg(benchmark::State& state) {
  Rng rng(3);
  features::FeatureMatrix m;
  m.columns = {"a", "b", "c", "d"};
  for (std::int64_t i = 0; i < state.range(0); ++i) {
    const int y = static_cast<int>(i % 2);
    for (int c = 0; c < 4; ++c) m.values.push_back(standard_normal(rng) + (c < 2 && y ? 1.0 : 0.0));
    m.labels.push_back(y);
    m.keys.push_back({"r", static_cast<std::uint32_t>(i)});
    m.groups.push_back("r");
  }
  for (auto _ : state) benchmark::DoNotOptimize(classify::train_logreg(m));
}
BENCHMARK(BM_TrainLogreg)->Arg(400)->Arg(4000);

}  // namespace

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "rtrace/analytics.hpp"
#include "rtrace/domain.hpp"
#include "rtrace/embedding.hpp"
#include "rtrace/stats.hpp"
#include "rtrace/trace_parser.hpp"

namespace {

using namespace rtrace;

const Codebook& codebook() {
  static const Codebook cb = [] {
    json codes = json::array();
    for (const char* name : {"Greeting", "Instruction", "Guiding Feedback", "Aligning to Prior Knowledge",
                             "Understanding/Engagement-Tutor", "Technical or Logistics", "Encouragement",
                             "Time Management"})
      codes.push_back({{"name", name}});
    return load_codebook(json{{"codes", codes}});
  }();
  return cb;
}

std::string reasoning_text(std::size_t words) {
  static const char* vocab[] = {"Greeting", "applies", "because", "the", "tutor", "says", "hello", "Instruction",
                                "does", "not", "since", "no", "task", "is", "given", "Encouragement", "might"};
  std::mt19937_64 rng(1);
  std::string s;
  for (std::size_t i = 0; i < words; ++i) s += std::string(i ? " " : "") + vocab[rng() % std::size(vocab)];
  return s;
}

std::vector<double> gaussian(std::size_t n, double m, double sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(m, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

void BM_Cosine(benchmark::State& state) {
  const auto u = gaussian(static_cast<std::size_t>(state.range(0)), 0, 1, 1);
  const auto v = gaussian(static_cast<std::size_t>(state.range(0)), 0, 1, 2);
  for (auto _ : state) benchmark::DoNotOptimize(cosine(u, v));
}
BENCHMARK(BM_Cosine)->Arg(256)->Arg(768)->Arg(4096);

void BM_Embed(benchmark::State& state) {
  HashedBagProvider provider(256, 512);
  const auto text = reasoning_text(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(provider.embed(text));
}
BENCHMARK(BM_Embed)->Arg(64)->Arg(512)->Arg(2000);

void BM_ParseTurn(benchmark::State& state) {
  const std::string raw = "<think>" + reasoning_text(static_cast<std::size_t>(state.range(0))) +
                          "</think>\nApplied: Greeting.\n{'Greeting': 1, 'Instruction': 0, 'Encouragement': 0,}";
  for (auto _ : state) benchmark::DoNotOptimize(parse_turn(raw, codebook(), {}));
}
BENCHMARK(BM_ParseTurn)->Arg(50)->Arg(500);

void BM_ReasoningUnits(benchmark::State& state) {
  const auto text = reasoning_text(500);
  for (auto _ : state) benchmark::DoNotOptimize(extract_reasoning_units(text, codebook()));
}
BENCHMARK(BM_ReasoningUnits);

void BM_Spearman(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = gaussian(n, 0.9, 0.05, 3);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<double>(i % 2);
  for (auto _ : state) benchmark::DoNotOptimize(stats::spearman(x, y));
}
BENCHMARK(BM_Spearman)->Arg(100)->Arg(10000);

void BM_Welch(benchmark::State& state) {
  const auto a = gaussian(6791, 0.957, 0.025, 4);
  const auto b = gaussian(2955, 0.904, 0.058, 5);
  for (auto _ : state) benchmark::DoNotOptimize(stats::welch_test(a, b));
}
BENCHMARK(BM_Welch);

void BM_RankCorrelationBootstrap(benchmark::State& state) {
  const auto cs = gaussian(2000, 0.93, 0.05, 6);
  std::vector<int> agree(cs.size());
  for (std::size_t i = 0; i < cs.size(); ++i) agree[i] = cs[i] > 0.93 ? 1 : static_cast<int>(i % 3 == 0);
  for (auto _ : state) benchmark::DoNotOptimize(stats::rank_correlation(cs, agree, {200, 1, 0.95}));
}
BENCHMARK(BM_RankCorrelationBootstrap)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include <omp.h>

#include <algorithm>
#include <random>

#include "aoplab/metrics.hpp"
#include "aoplab/ngram.hpp"
#include "aoplab/scorer.hpp"

using namespace aoplab;

namespace {

const std::vector<std::string>& vocab() {
  static const std::vector<std::string> v{"the", "a", "big", "red", "old", "small", "car", "dog", "house", "blue",
                                          "nice", "young", "man", "woman", "saw", "she", "x", "y", "z", "ball"};
  return v;
}

std::vector<cap::CapItem> items(std::size_t n) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> pick(2, 13);
  std::vector<cap::CapItem> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = vocab();
    auto a = pick(rng), b = pick(rng);
    if (a == b) b = a + 1;
    out.push_back({"b" + std::to_string(i), "She saw ", " today.", std::string("the"), v[a], v[b],
                   v[6 + i % 3], "bench"});
  }
  return out;
}

std::vector<std::vector<std::string>> stream(std::size_t tokens, std::size_t shards) {
  std::mt19937_64 rng(9);
  std::geometric_distribution<std::size_t> skew(0.15);
  std::vector<std::vector<std::string>> out(shards);
  for (std::size_t i = 0; i < tokens; ++i) out[i * shards / tokens].push_back(vocab()[skew(rng) % vocab().size()]);
  return out;
}

const ngram::TargetIndex& index() {
  static const auto idx = ngram::TargetIndex::build(items(200));
  return idx;
}

const std::vector<std::vector<std::string>>& corpus() {
  static const auto c = stream(1 << 20, 16);
  return c;
}

void BM_CountNaive(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(ngram::count_naive(corpus(), index()));
  state.SetItemsProcessed(state.iterations() * (1 << 20));
}

void BM_CountAutomaton(benchmark::State& state) {
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(ngram::count_stream(corpus(), index(), workers));
  state.SetItemsProcessed(state.iterations() * (1 << 20));
}

void BM_Timeline(benchmark::State& state) {
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(ngram::build_timeline(corpus(), index(), 1 << 14, workers));
  state.SetItemsProcessed(state.iterations() * (1 << 20));
}

void BM_Metrics(benchmark::State& state) {
  static const scoring::NgramOracle oracle = [] {
    std::vector<std::string> toks;
    for (const auto& s : stream(200000, 1)) toks = s;
    return scoring::NgramOracle(toks, 2, 1.0);
  }();
  static const auto corpus_items = items(2000);
  const metrics::MetricOptions options{.random_contexts = 4, .seed = 1, .workers = static_cast<int>(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(metrics::compute_all(corpus_items, oracle, options));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(corpus_items.size()));
}

void worker_args(benchmark::internal::Benchmark* b) {
  b->Arg(1)->Arg(std::max(2, omp_get_max_threads()));
  b->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_CountNaive)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CountAutomaton)->Apply(worker_args);
BENCHMARK(BM_Timeline)->Apply(worker_args);
BENCHMARK(BM_Metrics)->Apply(worker_args);

BENCHMARK_MAIN();

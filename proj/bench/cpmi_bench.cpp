#include <benchmark/benchmark.h>

#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "cpmi/dataset.hpp"
#include "cpmi/ngram.hpp"
#include "cpmi/scorers.hpp"
#include "cpmi/stats.hpp"
#include "test_util.hpp"

using namespace cpmi;

namespace {

struct Workload {
  std::unique_ptr<NGramProvider> provider;
  Registry registry;
  std::vector<ScoringInput> inputs;
};

const Workload& workload() {
  static const Workload w = [] {
    Workload w;
    std::vector<TokenStream> corpus;
    std::ifstream in(testutil::data_path("toy/toy_corpus.txt"));
    for (std::string line; std::getline(in, line);) {
      if (!line.empty()) corpus.push_back(tokenize(line));
    }
    NGramTrainOptions o;
    o.order = 3;
    w.provider = std::make_unique<NGramProvider>(train_ngram(corpus, o));
    w.registry = load_registry(testutil::data_path("registry/fed_turn_level.json"));
    w.inputs = to_scoring_inputs(load_fed(testutil::data_path("toy/toy_dataset.json")).samples);
    return w;
  }();
  return w;
}

void BM_ScoreDatasetSerial(benchmark::State& state) {
  const Workload& w = workload();
  ScoreDatasetOptions o;
  for (auto _ : state) {
    benchmark::DoNotOptimize(score_dataset_serial(*w.provider, w.inputs, w.registry, o));
  }
}
BENCHMARK(BM_ScoreDatasetSerial)->Unit(benchmark::kMillisecond);

void BM_ScoreDatasetParallel(benchmark::State& state) {
  const Workload& w = workload();
  ScoreDatasetOptions o;
  o.jobs = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(score_dataset(*w.provider, w.inputs, w.registry, o));
  }
}
BENCHMARK(BM_ScoreDatasetParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

std::pair<std::vector<double>, std::vector<double>> tied_pair() {
  std::mt19937_64 rng(7);
  std::vector<double> x(10), y(10);
  for (auto& v : x) v = static_cast<double>(rng() % 5);
  for (auto& v : y) v = static_cast<double>(rng() % 3);
  return {x, y};
}

void BM_SpearmanExactSerial(benchmark::State& state) {
  const auto [x, y] = tied_pair();
  for (auto _ : state) benchmark::DoNotOptimize(spearman_exact_pvalue_serial(x, y));
}
BENCHMARK(BM_SpearmanExactSerial)->Unit(benchmark::kMillisecond);

void BM_SpearmanExactParallel(benchmark::State& state) {
  const auto [x, y] = tied_pair();
  for (auto _ : state) benchmark::DoNotOptimize(spearman_exact_pvalue(x, y));
}
BENCHMARK(BM_SpearmanExactParallel)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

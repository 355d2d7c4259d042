#include <benchmark/benchmark.h>

#include <random>

#include "dnncov/coverage.hpp"
#include "dnncov/engine.hpp"
#include "lenet.hpp"

using namespace dnncov;

namespace {

std::vector<std::vector<double>> random_layers(const std::vector<std::size_t>& sizes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<std::vector<double>> v;
  for (auto n : sizes) {
    std::vector<double> layer(n);
    for (double& x : layer) x = nd(rng);
    v.push_back(std::move(layer));
  }
  return v;
}

void BM_ObserveSynthetic(benchmark::State& state) {
  const std::vector<std::size_t> sizes = {6, 16, 120, 84, 10};
  CoverageState cov(TripletRegistry("synthetic", sizes));
  const auto values = random_layers(sizes, 1);
  for (auto _ : state) cov.observe(values);
  state.counters["triplets"] = static_cast<double>(cov.registry().total_count());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cov.registry().total_count()));
}
BENCHMARK(BM_ObserveSynthetic)->Unit(benchmark::kMillisecond);

void BM_ObserveLeNet5Trace(benchmark::State& state) {
  const auto model = bench::lenet5(2);
  CoverageState cov(TripletRegistry::for_model(model));
  const auto trace = forward(model, bench::random_image(3));
  for (auto _ : state) cov.observe(trace);
  state.counters["triplets"] = static_cast<double>(cov.registry().total_count());
}
BENCHMARK(BM_ObserveLeNet5Trace)->Unit(benchmark::kMillisecond);

void BM_Stats(benchmark::State& state) {
  const std::vector<std::size_t> sizes = {6, 16, 120, 84, 10};
  CoverageState cov(TripletRegistry("synthetic", sizes));
  for (std::uint64_t s = 0; s < 10; ++s) cov.observe(random_layers(sizes, s));
  for (auto _ : state) benchmark::DoNotOptimize(stats(cov));
}
BENCHMARK(BM_Stats)->Unit(benchmark::kMillisecond);

void BM_UncoveredTargets(benchmark::State& state) {
  const std::vector<std::size_t> sizes = {6, 16, 120, 84, 10};
  CoverageState cov(TripletRegistry("synthetic", sizes));
  for (std::uint64_t s = 0; s < 10; ++s) cov.observe(random_layers(sizes, s));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(uncovered_targets(cov, seed++, 1));
}
BENCHMARK(BM_UncoveredTargets)->Unit(benchmark::kMillisecond);

}  // namespace

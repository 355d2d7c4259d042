#include <benchmark/benchmark.h>

#include "dnncov/engine.hpp"
#include "dnncov/guided.hpp"
#include "lenet.hpp"

using namespace dnncov;

namespace {

void BM_ForwardLeNet5(benchmark::State& state) {
  const auto model = bench::lenet5(4);
  const auto image = bench::random_image(5);
  for (auto _ : state) benchmark::DoNotOptimize(forward(model, image));
}
BENCHMARK(BM_ForwardLeNet5)->Unit(benchmark::kMicrosecond);

void BM_InputGradientLeNet5(benchmark::State& state) {
  std::vector<NetworkModel> models = {bench::lenet5(6), bench::lenet5(7), bench::lenet5(8)};
  const auto image = bench::random_image(9);
  const auto spec = build_objective({2, 3, 40, 11}, 0b101, 0, models, 4, GenParams{});
  for (auto _ : state) benchmark::DoNotOptimize(input_gradient(models, image, spec));
}
BENCHMARK(BM_InputGradientLeNet5)->Unit(benchmark::kMicrosecond);

void BM_AscendLeNet5(benchmark::State& state) {
  std::vector<NetworkModel> models = {bench::lenet5(10), bench::lenet5(11), bench::lenet5(12)};
  const auto image = bench::random_image(13);
  const auto spec = build_objective({2, 3, 40, 11}, 0b010, 0, models, 4, GenParams{});
  GenParams p;
  p.max_iterations = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(ascend(image, spec, p, models));
}
BENCHMARK(BM_AscendLeNet5)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace

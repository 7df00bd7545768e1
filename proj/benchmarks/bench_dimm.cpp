#include "dimm/gmm.hpp"
#include "dimm/pairwise_cl.hpp"
#include "dimm/simulation.hpp"

#include <benchmark/benchmark.h>

using namespace dimm;

namespace {

SimScenario bench_scenario(std::size_t n, std::vector<std::size_t> sizes) {
  SimScenario scn;
  scn.name = "bench";
  scn.n_subjects = n;
  std::vector<BlockSpec> specs;
  for (std::size_t j = 0; j < sizes.size(); ++j) specs.push_back({"b" + std::to_string(j + 1), sizes[j], Structure::AR1});
  scn.partition = BlockPartition(specs);
  scn.within_block = {2.0, 0.5};
  scn.between_recipe.seed = 99;
  scn.covariates.assign(2, CovariateRecipe{});
  scn.beta0 = VectorXd::Constant(3, 0.5);
  scn.methods = {SimMethod::Dimm};
  return scn;
}

void BM_FitBlock(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto m = static_cast<std::size_t>(state.range(1));
  const auto scn = bench_scenario(n, {m});
  const auto blocks = partition_dataset(generate_replicate(scn, 0), scn.partition);
  for (auto _ : state) benchmark::DoNotOptimize(fit_block(blocks[0], Structure::AR1));
}
BENCHMARK(BM_FitBlock)->Args({500, 10})->Args({1000, 45})->Args({4000, 10})->Unit(benchmark::kMillisecond);

void BM_WeightMatrix(benchmark::State& state) {
  const auto j = static_cast<std::size_t>(state.range(0));
  const auto scn = bench_scenario(1000, std::vector<std::size_t>(j, 8));
  const auto blocks = partition_dataset(generate_replicate(scn, 0), scn.partition);
  const auto fits = fit_blocks(blocks, std::vector<Structure>(j, Structure::AR1));
  const auto stacked = stack_scores(fits);
  for (auto _ : state) benchmark::DoNotOptimize(weight_matrix(stacked));
}
BENCHMARK(BM_WeightMatrix)->Arg(5)->Arg(20)->Unit(benchmark::kMicrosecond);

void BM_Replicate(benchmark::State& state) {
  auto scn = bench_scenario(500, {12, 10, 13, 8, 7});
  std::size_t rep = 0;
  for (auto _ : state) {
    const auto blocks = partition_dataset(generate_replicate(scn, rep++), scn.partition);
    const auto fits = fit_blocks(blocks, std::vector<Structure>(5, Structure::AR1));
    benchmark::DoNotOptimize(integrate(blocks, fits));
  }
}
BENCHMARK(BM_Replicate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

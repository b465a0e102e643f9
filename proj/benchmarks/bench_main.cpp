#include <benchmark/benchmark.h>

#include <random>

#include "npv/abstraction.hpp"
#include "npv/kde.hpp"
#include "npv/lipschitz.hpp"
#include "npv/systems.hpp"
#include "npv/verify.hpp"

using namespace npv;

namespace {

GridPartition case_grid(double delta) {
  return GridPartition(Box::cube(2, 0.0, 2.0), {delta, delta},
                       {{"D", {Box({0.0, 0.0}, {0.8, 0.4})}}, {"O", {Box({1.2, 1.6}, {2.0, 2.0})}}});
}

void BM_GridMax(benchmark::State& state) {
  const auto sys = systems::univariate_linear();
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto s = generate_samples(sys, 0, sys.spec().domain, n, 1);
  const KernelSpec k{KernelFamily::gaussian, {theoretical_bandwidth(n, 2)}, {theoretical_bandwidth(n, 2)}};
  const CondDensityEstimator est(s, k);
  const Box yb({-2.0}, {2.0});
  for (auto _ : state) benchmark::DoNotOptimize(grid_max_abs_partial(est, sys.spec().domain, yb, 50));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_GridMax)->Arg(1000)->Arg(10000)->Arg(60000)->Unit(benchmark::kMillisecond)->Complexity();

void BM_Adversary(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> lo(n, 0.0), up(n), v(n);
  for (std::size_t j = 0; j < n; ++j) {
    up[j] = 2.0 * u(rng) / static_cast<double>(n) + 1.0 / static_cast<double>(n);
    v[j] = u(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(resolve_adversary(lo, up, v, Direction::minimize));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Adversary)->RangeMultiplier(4)->Range(4, 4096)->Complexity();

void BM_ValueIteration(benchmark::State& state) {
  const auto g = case_grid(state.range(0) / 100.0);
  const auto m = model_based_mdp(systems::case_study_switched(), g);
  const auto psi = PathFormula::bounded_until(StateFormula::negate(StateFormula::atom("O")), StateFormula::atom("D"), 10);
  for (auto _ : state) benchmark::DoNotOptimize(check_path(m, psi));
  state.counters["states"] = static_cast<double>(m.num_states);
}
BENCHMARK(BM_ValueIteration)->Arg(40)->Arg(20)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_NpeBuild(benchmark::State& state) {
  const auto sys = systems::case_study_linear();
  const auto s = generate_samples(sys, 0, sys.spec().domain, 2000, 1);
  const KernelSpec k{KernelFamily::gaussian, scott_bandwidth(s.xs(), 2), scott_bandwidth(s.ys(), 2)};
  const std::vector<CondDensityEstimator> est{CondDensityEstimator(s, k)};
  const auto g = case_grid(state.range(0) / 100.0);
  for (auto _ : state) benchmark::DoNotOptimize(npe_imdp(est, sys.spec().actions, g, NpeConfig{3, 0}));
}
BENCHMARK(BM_NpeBuild)->Arg(40)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include "koopuq/koopman.hpp"
#include "koopuq/mc.hpp"
#include "koopuq/quad.hpp"
#include "koopuq/scenarios.hpp"

namespace {

using namespace koopuq;

void BM_BallSimulation(benchmark::State& state) {
  const BouncingBallParams params;
  const UncertaintyProblem prob = bouncing_ball_problem(params);
  for (auto _ : state) {
    benchmark::DoNotOptimize(prob.simulate({0.9}));
  }
}
BENCHMARK(BM_BallSimulation);

void BM_Quadrature1D(benchmark::State& state) {
  QuadOptions opt;
  opt.rtol = 1e-10;
  opt.atol = 1e-12;
  const Integrand f = [](const Vec& x) { return Vec{std::exp(-x[0] * x[0])}; };
  for (auto _ : state) {
    benchmark::DoNotOptimize(integrate_1d(f, -6.0, 6.0, opt));
  }
}
BENCHMARK(BM_Quadrature1D);

void BM_KoopmanExpectation(benchmark::State& state) {
  const ScenarioConfig cfg;
  const Scenario s = make_scenario(cfg);
  const double tol = std::pow(10.0, -static_cast<double>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(koopman_expectation(s.problem, s.objective, tol, tol));
  }
}
BENCHMARK(BM_KoopmanExpectation)->Arg(2)->Arg(4)->Arg(6);

void BM_MonteCarlo(benchmark::State& state) {
  const ScenarioConfig cfg;
  const Scenario s = make_scenario(cfg);
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(mc_expectation(s.problem, s.objective, n, 42));
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * static_cast<int64_t>(n));
}
BENCHMARK(BM_MonteCarlo)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();

// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include "eto/oracle.hpp"
#include "eto/scenario_io.hpp"

namespace {

std::shared_ptr<const eto::Scenario> bench_scenario(int users) {
  eto::SyntheticSpec s;
  s.layers = 7;
  s.segments = 8;
  s.rows = 2;
  s.cols = 4;
  s.horizon_s = 30.0;
  s.config.users = users;
  s.config.channels = 3;
  s.config.min_level = 1;
  s.config.episode_length = 6;
  return eto::synthetic_scenario(s);
}

template <bool kParallel>
void BM_BestJointAction(benchmark::State& state) {
  auto scen = bench_scenario(static_cast<int>(state.range(0)));
  eto::Environment env(scen);
  env.reset(1);
  for (auto _ : state) {
    auto r = kParallel ? eto::best_joint_action(env, scen->config.reward)
                       : eto::best_joint_action_serial(env, scen->config.reward);
    benchmark::DoNotOptimize(r.reward);
  }
}

template <bool kParallel>
void BM_ParetoSweep(benchmark::State& state) {
  auto scen = bench_scenario(2);
  eto::SweepOptions o;
  o.n_weights = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto r = kParallel ? eto::pareto_sweep(scen, o) : eto::pareto_sweep_serial(scen, o);
    benchmark::DoNotOptimize(r.points.data());
  }
}

}  // namespace

BENCHMARK(BM_BestJointAction<false>)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BestJointAction<true>)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ParetoSweep<false>)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ParetoSweep<true>)->Arg(200)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

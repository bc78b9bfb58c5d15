// Serial reference kernels against their OpenMP counterparts on the bundled
// obstacle scenario.

#include <benchmark/benchmark.h>

#include "pbds/scenario.h"

namespace {

struct Fixture {
  pbds::Scenario scenario = pbds::load_scenario(std::string(PBDS_SCENARIO_DIR) + "/sphere_obstacles.json");
  std::vector<pbds::TaskSpec> tasks = pbds::build_tasks(scenario);
  pbds::TaskTree tree = pbds::build_tree(scenario);
  std::vector<pbds::TangentState> states = pbds::sample_states(scenario, 1024, 1);
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_Combine(benchmark::State& state) {
  const Fixture& f = fixture();
  size_t i = 0;
  for (auto _ : state) {
    const auto& s = f.states[i++ % f.states.size()];
    benchmark::DoNotOptimize(pbds::combine(f.tasks, s.point, s.velocity));
  }
  state.SetItemsProcessed(state.iterations());
}

void BM_CombineParallel(benchmark::State& state) {
  const Fixture& f = fixture();
  size_t i = 0;
  for (auto _ : state) {
    const auto& s = f.states[i++ % f.states.size()];
    benchmark::DoNotOptimize(pbds::combine_parallel(f.tasks, s.point, s.velocity));
  }
  state.SetItemsProcessed(state.iterations());
}

void BM_Tree(benchmark::State& state) {
  const Fixture& f = fixture();
  size_t i = 0;
  for (auto _ : state) {
    const auto& s = f.states[i++ % f.states.size()];
    benchmark::DoNotOptimize(pbds::evaluate_tree(f.tree, s.point, s.velocity));
  }
  state.SetItemsProcessed(state.iterations());
}

void BM_Batch(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(pbds::evaluate_batch(f.tasks, f.states));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(f.states.size()));
}

void BM_BatchParallel(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(pbds::evaluate_batch_parallel(f.tasks, f.states));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(f.states.size()));
}

}  // namespace

BENCHMARK(BM_Combine);
BENCHMARK(BM_CombineParallel);
BENCHMARK(BM_Tree);
BENCHMARK(BM_Batch)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include "grpolab/advantage.hpp"
#include "grpolab/objectives.hpp"
#include "grpolab/policy.hpp"
#include "grpolab/tasks.hpp"
#include "grpolab/trainer.hpp"

using namespace grpolab;

namespace {

std::vector<RolloutGroup> make_batch(const TaskSpec& task, const PolicyParams& params,
                                     std::size_t q, std::size_t g, Rng& rng) {
  std::vector<RolloutGroup> groups;
  for (std::size_t i = 0; i < q; ++i) {
    RolloutGroup group;
    group.prompt = rng.index(task.num_prompts());
    for (std::size_t j = 0; j < g; ++j) {
      group.trajectories.push_back(sample_trajectory(params, group.prompt, rng));
      group.rewards.push_back(reward(task, group.trajectories.back()));
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

void BM_SampleTrajectory(benchmark::State& state) {
  const auto v = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const auto params = PolicyParams::random({16, 8, v}, 1.0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(sample_trajectory(params, 3, rng));
}
BENCHMARK(BM_SampleTrajectory)->Arg(8)->Arg(64)->Arg(512);

void BM_GradAvgProb(benchmark::State& state) {
  Rng rng(2);
  const auto params = PolicyParams::random({16, 8, 64}, 1.0, rng);
  const auto traj = sample_trajectory(params, 5, rng);
  for (auto _ : state) benchmark::DoNotOptimize(grad_avg_prob(params, traj));
}
BENCHMARK(BM_GradAvgProb);

void BM_GroupNormalize(benchmark::State& state) {
  Rng rng(3);
  std::vector<int> rewards(static_cast<std::size_t>(state.range(0)));
  for (int& r : rewards) r = rng.bernoulli(0.3) ? 1 : 0;
  for (auto _ : state) benchmark::DoNotOptimize(group_normalize(rewards));
}
BENCHMARK(BM_GroupNormalize)->Arg(2)->Arg(16)->Arg(1024);

// Equal rollouts per batch (128), group size varied.
void BM_GrpoSurrogate(benchmark::State& state) {
  const auto g = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  const auto task = make_kofv_task(8, 4, 2, 64);
  const auto params = PolicyParams::random(task.policy_shape(), 0.5, rng);
  const auto batch = make_batch(task, params, 128 / g, g, rng);
  ObjectiveSpec spec;
  spec.kind = ObjectiveKind::grpo;
  spec.group_size = g;
  for (auto _ : state) benchmark::DoNotOptimize(grpo_surrogate(params, batch, spec));
}
BENCHMARK(BM_GrpoSurrogate)->Arg(2)->Arg(4)->Arg(16);

void BM_TwoGrpo(benchmark::State& state) {
  Rng rng(5);
  const auto task = make_kofv_task(8, 4, 2, 64);
  const auto params = PolicyParams::random(task.policy_shape(), 0.5, rng);
  const auto batch = make_batch(task, params, 64, 2, rng);
  for (auto _ : state) benchmark::DoNotOptimize(two_grpo_objective(params, batch));
}
BENCHMARK(BM_TwoGrpo);

void BM_ExpectedReward(benchmark::State& state) {
  Rng rng(6);
  const auto task = make_needle_task(8, 2, 20, rng);
  const auto params = PolicyParams::random(task.policy_shape(), 1.0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(expected_reward(task, params));
}
BENCHMARK(BM_ExpectedReward);

void BM_TrainerStep(benchmark::State& state) {
  const auto g = static_cast<std::size_t>(state.range(0));
  Rng rng(7);
  const auto task = make_needle_task(8, 2, 20, rng);
  TrainConfig config;
  config.group_size = g;
  config.prompts_per_batch = 128 / g;
  config.reference_prompts = 8;
  config.epochs = 1000000;
  config.objective.kind = ObjectiveKind::grpo;
  Trainer trainer(task, config);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step());
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_TrainerStep)->Arg(2)->Arg(16);

}  // namespace

BENCHMARK_MAIN();

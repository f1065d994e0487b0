// Serial reference vs OpenMP paths. Arg 0 is the worker/thread count; 1 runs
// the serial path. Outputs are identical across counts (see the unit tests),
// so only time differs.
#include <benchmark/benchmark.h>
#include <omp.h>

#include "aed/analyst/analyst_env.hpp"
#include "aed/analyst/pointing_task.hpp"
#include "aed/demos/gp.hpp"
#include "aed/eval/evaluation.hpp"

using namespace aed;

namespace {

std::shared_ptr<const UserModel> bench_user(Study s) {
  static std::map<int, std::shared_ptr<const UserModel>> cache;
  auto& slot = cache[to_int(s)];
  if (!slot) {
    EnsembleTrainingConfig cfg;
    cfg.pointing.study = s;
    cfg.prior = default_prior(s);
    cfg.dims = default_controller_dims(s);
    cfg.ppo.n_envs = 1;
    cfg.ppo.n_steps = 64;
    cfg.ppo.total_steps = 64;
    cfg.ppo.epochs = 1;
    slot = std::make_shared<const UserModel>(train_ensemble(cfg));
  }
  return slot;
}

void worker_args(benchmark::internal::Benchmark* b) {
  b->Arg(1);
  const int n = omp_get_num_procs();
  if (n > 1) b->Arg(n);
  b->Arg(4);
  b->UseRealTime()->Unit(benchmark::kMillisecond);
}

void BM_UserRollout(benchmark::State& state) {
  const Study s = Study::Two;
  Rng rng(1);
  const MlpPolicy policy(default_controller_dims(s), rng);
  PointingConfig pc;
  pc.study = s;
  RolloutOptions o;
  o.workers = static_cast<int>(state.range(0));
  for (auto _ : state) {
    std::vector<PointingTrainEnv> envs;
    for (int i = 0; i < 8; ++i) envs.emplace_back(pc, default_prior(s), derive_seed(3, i));
    VecEnv<PointingTrainEnv> vec(std::move(envs), 5);
    auto buf = collect_rollouts(policy, vec, 256, o);
    benchmark::DoNotOptimize(buf.rewards.data());
  }
  state.SetItemsProcessed(state.iterations() * 8 * 256);
}
BENCHMARK(BM_UserRollout)->Apply(worker_args);

void BM_AnalystRollout(benchmark::State& state) {
  auto task = std::make_shared<const PointingTask>(bench_user(Study::Two));
  Rng rng(2);
  const SetPolicy policy(default_analyst_dims(*task, Architecture::Relational, 4), rng);
  RolloutOptions o;
  o.workers = static_cast<int>(state.range(0));
  AnalystEnvConfig ec;
  for (auto _ : state) {
    std::vector<AnalystEnv> envs;
    for (int i = 0; i < 8; ++i) envs.emplace_back(task, ec, derive_seed(7, i), &policy);
    VecEnv<AnalystEnv> vec(std::move(envs), 9);
    auto buf = collect_rollouts(policy, vec, 32, o);
    benchmark::DoNotOptimize(buf.rewards.data());
  }
  state.SetItemsProcessed(state.iterations() * 8 * 32);
}
BENCHMARK(BM_AnalystRollout)->Apply(worker_args);

void BM_EvaluateAnalyst(benchmark::State& state) {
  auto task = std::make_shared<const PointingTask>(bench_user(Study::Two));
  Rng rng(4);
  const SetPolicy policy(default_analyst_dims(*task, Architecture::Relational, 4), rng);
  omp_set_num_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto ev = evaluate_analyst(policy_analyst(policy, *task), *task, 4, 64, DesignCondition::Optimised, 1);
    benchmark::DoNotOptimize(ev.curve.points.data());
  }
  omp_set_num_threads(omp_get_num_procs());
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_EvaluateAnalyst)->Apply(worker_args);

void BM_BehaviourCurve(benchmark::State& state) {
  auto user = bench_user(Study::One);
  const std::vector<double> grid{0.05, 0.2, 0.4};
  omp_set_num_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto c = behaviour_curve(*user, ParamId::RhoOcular, grid, 200, 3);
    benchmark::DoNotOptimize(c.data());
  }
  omp_set_num_threads(omp_get_num_procs());
  state.SetItemsProcessed(state.iterations() * 600);
}
BENCHMARK(BM_BehaviourCurve)->Apply(worker_args);

}  // namespace

BENCHMARK_MAIN();

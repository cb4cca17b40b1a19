#include <benchmark/benchmark.h>

#include "condafr/autodiff.hpp"
#include "condafr/estimators.hpp"
#include "condafr/orchestrator.hpp"
#include "condafr/replay.hpp"
#include "condafr/streams.hpp"

using namespace condafr;

static void BM_MatmulForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = rng.normal_matrix(n, n);
  const Tensor b = rng.normal_matrix(n, n);
  for (auto _ : state) {
    ad::Tape tape;
    ad::Var va = tape.leaf(a), vb = tape.leaf(b);
    ad::Var y = ad::sum(ad::matmul(va, vb));
    tape.backward(y);
    benchmark::DoNotOptimize(tape.grad(va).values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(3 * n * n * n));
}
BENCHMARK(BM_MatmulForwardBackward)->Arg(32)->Arg(64)->Arg(128);

// One environment of the default task-drift stream, trained with GFR for
// `range(0)` joint steps after a short warmup.
static void BM_TrainEnvironment(benchmark::State& state) {
  auto spec = streams::default_spec(streams::Scenario::task_drift);
  spec.num_environments = 2;
  spec.classes_per_task = {2, 2};
  spec.num_classes = 4;
  const auto stream = streams::build_stream(spec);
  auto config = orchestrator::RunConfig::preset(orchestrator::Method::gfr);
  config.steps_per_env = static_cast<std::size_t>(state.range(0));
  config.warmup_steps = 10;
  config.estimate_bound = false;
  config.eval_every = config.steps_per_env;
  for (auto _ : state) {
    auto learner = orchestrator::Learner::create(config, stream);
    learner.train_next_env();
    learner.train_next_env();
    benchmark::DoNotOptimize(learner.global_step);
  }
  state.SetItemsProcessed(state.iterations() * 2 * state.range(0));
}
BENCHMARK(BM_TrainEnvironment)->Arg(100)->Unit(benchmark::kMillisecond);

static void BM_GenerateFeatures(benchmark::State& state) {
  Rng rng(2);
  inference::Dims dims;
  dims.class_count = 10;
  const auto live = inference::InferenceState::create(dims, {}, rng);
  const Tensor x = rng.normal_matrix(60, 2);
  std::vector<int> y(60);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 2);
  const streams::Environment env(0, x, y, x, y);
  const auto snap = replay::take_snapshot(live, env, 0, true);
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(replay::generate_features(snap, n, rng).h.values().data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GenerateFeatures)->Arg(64)->Arg(1024);

static void BM_EstimateLambda(benchmark::State& state) {
  Rng rng(3);
  const Tensor a = rng.normal_matrix(400, 32);
  Tensor b = rng.normal_matrix(400, 32);
  for (double& v : b.values()) v += 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(estimators::estimate_lambda(a, b, rng));
}
BENCHMARK(BM_EstimateLambda)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

#include <gtest/gtest.h>

#include <sstream>

#include "condafr/errors.hpp"
#include "condafr/orchestrator.hpp"
#include "condafr/streams.hpp"

using namespace condafr;
using namespace condafr::orchestrator;

namespace {

streams::Stream small_stream(std::size_t tasks, std::uint64_t seed = 3) {
  auto spec = streams::default_spec(streams::Scenario::task_drift);
  spec.num_environments = tasks;
  spec.classes_per_task.assign(tasks, 2);
  spec.num_classes = 2 * tasks;
  spec.samples_per_class = 20;
  spec.seed = seed;
  return streams::build_stream(spec);
}

RunConfig small_config(Method m) {
  RunConfig c = RunConfig::preset(m);
  c.warmup_steps = 20;
  c.steps_per_env = 30;
  c.batch_size = 16;
  c.eval_every = 10;
  c.dims.latent_dim = 2;
  c.dims.feature_dim = 4;
  c.dims.hidden_dim = 8;
  c.solver_hidden = 8;
  c.lambda.steps = 20;
  c.c_star.steps = 20;
  c.kl_samples = 32;
  return c;
}

std::string csv(const MetricsLog& log) {
  std::ostringstream out;
  log.write_csv(out);
  log.write_bound_csv(out);
  return out.str();
}

}  // namespace

TEST(Presets, FollowTheComponentGrid) {
  const RunConfig gfr = RunConfig::preset(Method::gfr);
  EXPECT_EQ(gfr.replay, ReplayKind::generative);
  EXPECT_TRUE(gfr.task_confusion && gfr.warmup && gfr.snapshot);

  const RunConfig b1 = RunConfig::preset(Method::baseline1_optimal);
  EXPECT_EQ(b1.replay, ReplayKind::none);
  EXPECT_TRUE(b1.task_confusion && b1.warmup && b1.snapshot);

  const RunConfig b2 = RunConfig::preset(Method::baseline2);
  EXPECT_TRUE(b2.task_confusion);
  EXPECT_FALSE(b2.warmup);

  const RunConfig b3 = RunConfig::preset(Method::baseline3);
  EXPECT_FALSE(b3.task_confusion || b3.warmup);
  EXPECT_TRUE(b3.snapshot);

  const RunConfig b4 = RunConfig::preset(Method::baseline4_naive);
  EXPECT_FALSE(b4.task_confusion || b4.warmup || b4.snapshot);
  EXPECT_EQ(b4.replay, ReplayKind::none);

  EXPECT_EQ(RunConfig::preset(Method::memory_replay).replay, ReplayKind::memory);
  EXPECT_EQ(RunConfig::preset(Method::noise_replay).replay, ReplayKind::noise);
}

TEST(Presets, NamesRoundTrip) {
  EXPECT_EQ(all_methods().size(), 7u);
  for (Method m : all_methods()) EXPECT_EQ(method_from_string(to_string(m)), m);
  EXPECT_THROW(method_from_string("gfr2"), ConfigError);
}

TEST(Validate, RejectsInconsistentSwitches) {
  RunConfig c = small_config(Method::gfr);
  c.snapshot = false;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config(Method::gfr);
  c.batch_size = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config(Method::baseline4_naive);
  c.augment_ratio = 0.25;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Run, SingleTaskRecordsOneEnvironment) {
  const MetricsLog log = run_scenario(small_stream(1), small_config(Method::gfr));
  ASSERT_FALSE(log.rows().empty());
  for (const auto& r : log.rows()) EXPECT_EQ(r.env, 0u);
  ASSERT_EQ(log.bounds().size(), 1u);
  EXPECT_EQ(log.bounds()[0].envs.size(), 1u);
  EXPECT_EQ(log.bounds()[0].kl_total(), 0.0);
  EXPECT_FALSE(log.bounds()[0].envs[0].kl_raw.has_value());
}

TEST(Run, LogIsAppendOnlyAndStepsNeverDecrease) {
  const auto stream = small_stream(3);
  Learner l = Learner::create(small_config(Method::gfr), stream);
  std::vector<MetricsRow> seen;
  while (!l.finished()) {
    l.train_next_env();
    const auto& rows = l.log.rows();
    ASSERT_GE(rows.size(), seen.size());
    for (std::size_t i = 0; i < seen.size(); ++i) {
      EXPECT_EQ(rows[i].global_step, seen[i].global_step);
      EXPECT_EQ(rows[i].all_seen_acc, seen[i].all_seen_acc);
    }
    seen = rows;
  }
  for (std::size_t i = 1; i < seen.size(); ++i) EXPECT_GE(seen[i].global_step, seen[i - 1].global_step);
  EXPECT_EQ(seen.back().env, 2u);
  EXPECT_EQ(l.snapshots.size(), 3u);
}

TEST(Run, DecreasingStepIsRejected) {
  MetricsLog log;
  MetricsRow r;
  r.global_step = 10;
  log.append(r);
  r.global_step = 9;
  EXPECT_THROW(log.append(r), std::logic_error);
}

TEST(Run, SameSeedGivesIdenticalLogs) {
  const auto stream = small_stream(2);
  const RunConfig c = small_config(Method::gfr);
  EXPECT_EQ(csv(run_scenario(stream, c)), csv(run_scenario(stream, c)));
}

TEST(Run, DifferentSeedChangesTheRun) {
  const auto stream = small_stream(2);
  RunConfig a = small_config(Method::gfr);
  RunConfig b = a;
  b.seed = 2;
  EXPECT_NE(csv(run_scenario(stream, a)), csv(run_scenario(stream, b)));
}

TEST(Run, AccuraciesAreFractions) {
  for (Method m : all_methods()) {
    const MetricsLog log = run_scenario(small_stream(2), small_config(m));
    for (const auto& r : log.rows()) {
      EXPECT_GE(r.first_task_acc, 0.0);
      EXPECT_LE(r.first_task_acc, 1.0);
      EXPECT_GE(r.all_seen_acc, 0.0);
      EXPECT_LE(r.all_seen_acc, 1.0);
    }
  }
}

TEST(Run, NaiveBaselineKeepsNoSnapshots) {
  const Learner l = run_learner(small_stream(2), small_config(Method::baseline4_naive));
  EXPECT_TRUE(l.snapshots.empty());
  EXPECT_TRUE(l.past_snapshots().empty());
}

TEST(Run, FeaturesAreRepeatablePerEnvironment) {
  const auto stream = small_stream(2);
  const Learner l = run_learner(stream, small_config(Method::gfr));
  EXPECT_EQ(l.features(0, stream[0].query_x()), l.features(0, stream[0].query_x()));
  EXPECT_EQ(l.query_accuracy(1), l.query_accuracy(1));
}

TEST(Run, BoundRowsCarryEveryTerm) {
  const MetricsLog log = run_scenario(small_stream(2), small_config(Method::gfr));
  ASSERT_EQ(log.bounds().size(), 2u);
  const auto& b = log.bounds().back();
  ASSERT_EQ(b.envs.size(), 2u);
  EXPECT_TRUE(b.envs[0].kl_raw.has_value());
  EXPECT_FALSE(b.envs[1].kl_raw.has_value());
  double rhs = b.c_star + b.kl_total();
  for (const auto& e : b.envs) {
    rhs += e.eps_support + e.lambda_hat;
    EXPECT_GE(e.kl_hat, 0.0);
  }
  EXPECT_NEAR(b.rhs, rhs, 1e-12);
}

TEST(Run, ConditionIdsDifferAcrossEnvironments) {
  EXPECT_NE(condition_of(0), condition_of(1));
}

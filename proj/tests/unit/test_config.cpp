#include <gtest/gtest.h>

#include "json.hpp"

#include "condafr/checkpoint.hpp"
#include "condafr/config.hpp"
#include "condafr/errors.hpp"

using namespace condafr;

namespace {

template <class F>
std::string error_key(F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<no error>";
}

config::CliConfig tiny() {
  return config::build(config::parse(R"(
    # a small task-drift run
    stream.num_environments = 2
    stream.classes_per_task = 2,2
    stream.num_classes = 4
    stream.samples_per_class = 12
    run.warmup_steps = 10
    run.steps_per_env = 20
    run.batch_size = 8
    run.eval_every = 10
    model.latent_dim = 2
    model.feature_dim = 4
    model.hidden_dim = 8
    model.solver_hidden = 8
    estimator.lambda_steps = 10
    estimator.c_star_steps = 10
    run.kl_samples = 16
  )"));
}

}  // namespace

TEST(ConfigParse, CommentsBlanksAndDuplicates) {
  const auto e = config::parse("a = 1\n\n# skip\nb=two # trailing\na = 3\n");
  EXPECT_EQ(e.size(), 2u);
  EXPECT_EQ(e.at("a"), "3");
  EXPECT_EQ(e.at("b"), "two");
}

TEST(ConfigParse, MalformedLineNamesTheLine) {
  EXPECT_EQ(error_key([] { config::parse("a = 1\nnot an assignment\n"); }), "line 2");
  EXPECT_EQ(error_key([] { config::parse_override("run.seed"); }), "run.seed");
}

TEST(ConfigBuild, UnknownKeyIsNamed) {
  EXPECT_EQ(error_key([] { config::build({{"run.sede", "3"}}); }), "run.sede");
}

TEST(ConfigBuild, BadValueIsNamed) {
  EXPECT_EQ(error_key([] { config::build({{"run.steps_per_env", "-4"}}); }), "run.steps_per_env");
  EXPECT_EQ(error_key([] { config::build({{"run.warmup", "maybe"}}); }), "run.warmup");
  EXPECT_EQ(error_key([] { config::build({{"run.method", "gfr2"}}); }), "run.method");
}

TEST(ConfigBuild, ExplicitKeysOverridePresets) {
  const auto c = config::build({{"run.warmup", "true"}, {"run.method", "baseline2"}});
  EXPECT_EQ(c.run.method, orchestrator::Method::baseline2);
  EXPECT_TRUE(c.run.warmup);
  const auto d = config::build({{"run.method", "baseline2"}});
  EXPECT_FALSE(d.run.warmup);
}

TEST(ConfigBuild, ScenarioSelectsItsDefaultStream) {
  const auto c = config::build({{"stream.scenario", "domain_drift"}});
  EXPECT_EQ(c.stream.scenario, streams::Scenario::domain_drift);
  EXPECT_EQ(c.stream.transforms, streams::default_spec(streams::Scenario::domain_drift).transforms);
}

TEST(ConfigRender, RoundTripsThroughParse) {
  const auto c = config::build({{"stream.scenario", "combined"}, {"run.method", "memory_replay"}, {"run.seed", "9"}});
  const std::string text = config::render(c);
  EXPECT_EQ(config::render(config::build(config::parse(text))), text);
  EXPECT_EQ(config::hash(config::build(config::parse(text))), config::hash(c));
}

TEST(ConfigRender, EveryKnownKeyIsRendered) {
  const auto entries = config::parse(config::render(config::CliConfig{}));
  for (const auto& k : config::known_keys()) EXPECT_TRUE(entries.contains(k)) << k;
  EXPECT_EQ(entries.size(), config::known_keys().size());
}

TEST(ConfigHash, SixteenHexDigitsAndSensitive) {
  const auto a = config::CliConfig{};
  const auto h = config::hash(a);
  EXPECT_EQ(h.size(), 16u);
  EXPECT_EQ(h.find_first_not_of("0123456789abcdef"), std::string::npos);
  EXPECT_NE(config::hash(config::build({{"run.seed", "2"}})), h);
}

TEST(Transforms, FormatAndParseAreInverse) {
  const std::vector<streams::DomainTransform> t{{}, {0.25, {1.5, -0.5}, 1.2, 0.05}};
  EXPECT_EQ(config::parse_transforms(config::format_transforms(t)), t);
  EXPECT_THROW(config::parse_transforms("1:2:3"), std::invalid_argument);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto cfg = tiny();
  auto l = orchestrator::Learner::create(cfg.run, streams::build_stream(cfg.stream));
  l.train_next_env();
  const std::string text = checkpoint::serialize(cfg, l);
  auto loaded = checkpoint::deserialize(text);
  EXPECT_EQ(checkpoint::serialize(loaded.config, loaded.learner), text);
  EXPECT_EQ(loaded.learner.inference.representation.value_hash(), l.inference.representation.value_hash());
  EXPECT_EQ(loaded.learner.global_step, l.global_step);
}

TEST(Checkpoint, ResumedRunMatchesUninterruptedRun) {
  const auto cfg = tiny();
  auto straight = orchestrator::Learner::create(cfg.run, streams::build_stream(cfg.stream));
  straight.train_next_env();
  auto resumed = checkpoint::deserialize(checkpoint::serialize(cfg, straight)).learner;
  straight.train_next_env();
  resumed.train_next_env();
  EXPECT_EQ(checkpoint::serialize(cfg, resumed), checkpoint::serialize(cfg, straight));
}

TEST(Checkpoint, RejectsForeignOrNewerFiles) {
  EXPECT_THROW(checkpoint::deserialize("not json"), DataError);
  EXPECT_THROW(checkpoint::deserialize(R"({"format":"other","version":1})"), DataError);
  EXPECT_THROW(checkpoint::deserialize(R"({"format":"condafr-checkpoint","version":99})"), DataError);
  EXPECT_THROW(checkpoint::deserialize(R"({"format":"condafr-checkpoint","version":1})"), DataError);
}

TEST(Checkpoint, TamperedSnapshotFailsItsHash) {
  const auto cfg = tiny();
  auto l = orchestrator::Learner::create(cfg.run, streams::build_stream(cfg.stream));
  l.train_next_env();
  auto j = nlohmann::json::parse(checkpoint::serialize(cfg, l));
  ASSERT_FALSE(j["snapshots"].empty());
  auto& rep = j["snapshots"][0]["representation"]["params"];
  auto& first = rep.begin().value();
  first["value"]["values"][0] = first["value"]["values"][0].get<double>() + 1.0;
  EXPECT_THROW(checkpoint::deserialize(j.dump()), DataError);
}

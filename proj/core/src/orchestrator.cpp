#include "condafr/orchestrator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>

#include "condafr/errors.hpp"
#include "condafr/eval_access.hpp"

namespace condafr::orchestrator {

namespace {

std::string fmt(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::pair<int, int> label_span(const streams::Environment& env) {
  const auto classes = env.classes();
  return {classes.front(), classes.back() + 1};
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::gfr: return "gfr";
    case Method::memory_replay: return "memory_replay";
    case Method::noise_replay: return "noise_replay";
    case Method::baseline1_optimal: return "baseline1_optimal";
    case Method::baseline2: return "baseline2";
    case Method::baseline3: return "baseline3";
    case Method::baseline4_naive: return "baseline4_naive";
  }
  return "unknown";
}

Method method_from_string(const std::string& name) {
  for (Method m : all_methods()) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("run.method", "unknown method '" + name + "'");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods{Method::gfr,       Method::memory_replay,   Method::noise_replay,
                                           Method::baseline1_optimal, Method::baseline2, Method::baseline3,
                                           Method::baseline4_naive};
  return methods;
}

RunConfig RunConfig::preset(Method method) {
  RunConfig c;
  c.apply_method(method);
  return c;
}

void RunConfig::apply_method(Method m) {
  method = m;
  switch (m) {
    case Method::gfr: replay = ReplayKind::generative; break;
    case Method::memory_replay: replay = ReplayKind::memory; break;
    case Method::noise_replay: replay = ReplayKind::noise; break;
    default: replay = ReplayKind::none; break;
  }
  task_confusion = m != Method::baseline3 && m != Method::baseline4_naive;
  warmup = m != Method::baseline2 && m != Method::baseline3 && m != Method::baseline4_naive;
  snapshot = m != Method::baseline4_naive;
}

void RunConfig::validate() const {
  if (batch_size < 2) throw ConfigError("run.batch_size", "must be at least 2 for batch normalization");
  if (steps_per_env == 0) throw ConfigError("run.steps_per_env", "must be positive");
  if (augment_ratio < 0.0 || augment_ratio >= 1.0) throw ConfigError("run.augment_ratio", "must lie in [0, 1)");
  if (augment_ratio > 0.0 && !snapshot) throw ConfigError("run.augment_ratio", "augmentation needs snapshots");
  if (replay == ReplayKind::generative && !snapshot) {
    throw ConfigError("run.snapshot", "generative replay needs snapshots");
  }
  if (memory_capacity == 0) throw ConfigError("run.memory_capacity", "must be positive");
  if (eval_every == 0) throw ConfigError("run.eval_every", "must be positive");
  if (inference.beta < 0.0) throw ConfigError("inference.beta", "must be nonnegative");
  if (inference.kl_weight < 0.0) throw ConfigError("inference.kl_weight", "must be nonnegative");
  if (dims.latent_dim == 0 || dims.feature_dim == 0 || dims.hidden_dim == 0 || solver_hidden == 0) {
    throw ConfigError("model", "layer widths must be positive");
  }
}

const char* MetricsLog::header() {
  return "global_step,env,method,first_task_acc,all_seen_acc,env_acc,lambda_hat,kl_hat,bound_rhs,bound_lhs,"
         "loss_inference,loss_solver";
}

const char* MetricsLog::bound_header() {
  return "env_step,env,eps_support,lambda_hat,kl_raw,kl_hat,query_error,c_star,rhs,lhs";
}

void MetricsLog::append(MetricsRow row) {
  if (!rows_.empty() && row.global_step < rows_.back().global_step) {
    throw std::logic_error("metrics rows must have nondecreasing global steps");
  }
  rows_.push_back(std::move(row));
}

void MetricsLog::write_csv(std::ostream& out) const {
  out << header() << '\n';
  for (const auto& r : rows_) {
    out << r.global_step << ',' << r.env << ',' << r.method << ',' << fmt(r.first_task_acc) << ','
        << fmt(r.all_seen_acc) << ',' << fmt(r.env_acc) << ',' << fmt(r.lambda_hat) << ',' << fmt(r.kl_hat) << ','
        << fmt(r.bound_rhs) << ',' << fmt(r.bound_lhs) << ',' << fmt(r.loss_inference) << ',' << fmt(r.loss_solver)
        << '\n';
  }
}

void MetricsLog::write_bound_csv(std::ostream& out) const {
  out << bound_header() << '\n';
  for (const auto& b : bounds_) {
    for (const auto& e : b.envs) {
      out << b.env_step << ',' << e.env << ',' << fmt(e.eps_support) << ',' << fmt(e.lambda_hat) << ','
          << fmt(e.kl_raw) << ',' << (e.kl_raw ? fmt(e.kl_hat) : std::string()) << ',' << fmt(e.query_error) << ','
          << fmt(b.c_star) << ',' << fmt(b.rhs) << ',' << fmt(b.lhs) << '\n';
    }
  }
}

std::size_t condition_of(std::size_t env) { return env; }

Learner Learner::create(const RunConfig& config, streams::Stream stream) {
  config.validate();
  if (stream.empty()) throw DataError("stream has no environments");
  int max_label = -1;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const auto& env = stream[i];
    if (env.index() != i) throw DataError("environment " + std::to_string(i) + " carries index " +
                                          std::to_string(env.index()));
    if (env.support_y().empty()) throw DataError("environment " + std::to_string(i) + " has no support rows");
    if (env.query_x().rows() == 0) throw DataError("environment " + std::to_string(i) + " has no query rows");
    if (env.input_dim() != stream.front().input_dim()) throw DataError("environments disagree on input width");
    for (int y : env.support_y()) max_label = std::max(max_label, y);
  }
  if (config.estimate_bound) {
    for (const auto& env : stream) {
      if (env.support_x().rows() < 4 || env.query_x().rows() < 4) {
        throw DataError("bound estimation needs at least 4 support and query rows per environment");
      }
    }
  }

  RunConfig cfg = config;
  cfg.dims.input_dim = stream.front().input_dim();
  cfg.dims.condition_count = stream.size();
  cfg.dims.class_count = std::max(cfg.dims.class_count, static_cast<std::size_t>(max_label + 1));

  Rng rng(cfg.seed);
  auto inf = inference::InferenceState::create(cfg.dims, cfg.inference, rng);
  auto sol = solver::SolverState::create({cfg.dims.feature_dim, cfg.solver_hidden, cfg.dims.class_count}, rng);
  return Learner{cfg,
                 std::move(stream),
                 std::move(inf),
                 std::move(sol),
                 {},
                 replay::MemoryBank(cfg.memory_capacity),
                 std::move(rng),
                 0,
                 0,
                 {}};
}

const replay::Snapshot* Learner::snapshot_for(std::size_t env) const {
  for (const auto& s : snapshots) {
    if (s.env_index == env) return &s;
  }
  return nullptr;
}

std::vector<const replay::Snapshot*> Learner::past_snapshots() const {
  std::vector<const replay::Snapshot*> out;
  for (const auto& s : snapshots) {
    if (s.env_index < envs_done) out.push_back(&s);
  }
  return out;
}

Tensor Learner::features(std::size_t env, const Tensor& x) const {
  Rng draw(config.seed ^ (0xd1b54a32d192ed03ULL * (env + 1)));
  return sampled_features(env, x, draw);
}

Tensor Learner::sampled_features(std::size_t env, const Tensor& x, Rng& rng) const {
  if (env >= stream.size()) throw DataError("environment " + std::to_string(env) + " is not part of the stream");
  const replay::Snapshot* snap = snapshot_for(env);
  if (snap != nullptr && snap->has_encoder) return snap->sample_features(x, rng);
  return inference::sample_features(inference.representation, inference.dims, x, condition_of(env), rng);
}

std::vector<int> Learner::predict(const Tensor& h) const {
  if (config.task_confusion) return solver::predict(solver, h);
  return ad::argmax_rows(inference::hypothesis_logits(inference.heads, inference.dims, h));
}

double Learner::query_accuracy(std::size_t env) const {
  const std::size_t seen = std::min(stream.size(), envs_done + 1);
  return solver::evaluate_accuracy([this](const Tensor& h) { return predict(h); },
                                   [this](const streams::Environment& e) { return features(e.index(), e.query_x()); },
                                   std::span(stream.data(), seen), solver::EvalScope::env, env);
}

namespace {

struct StepLosses {
  double inference = 0.0;
  double solver = 0.0;
};

std::vector<FeatureBatch> replay_batches(const Learner& l, Rng& rng) {
  std::vector<FeatureBatch> out;
  const std::size_t t = l.envs_done;
  if (t == 0 || l.config.replay == ReplayKind::none) return out;
  const auto counts = replay::even_split(l.config.batch_size, t);
  for (std::size_t i = 0; i < t; ++i) {
    switch (l.config.replay) {
      case ReplayKind::generative: {
        const replay::Snapshot* snap = l.snapshot_for(i);
        if (snap == nullptr) throw std::logic_error("missing snapshot for environment " + std::to_string(i));
        out.push_back(replay::generate_features(*snap, counts[i], rng));
        break;
      }
      case ReplayKind::memory: out.push_back(replay::memory_sample(l.memory, i, counts[i], rng)); break;
      case ReplayKind::noise:
        out.push_back(replay::noise_sample(l.config.dims.feature_dim, counts[i], label_span(l.stream[i]), rng));
        break;
      case ReplayKind::none: break;
    }
  }
  return out;
}

StepLosses joint_step(Learner& l, const streams::Environment& env) {
  const RunConfig& cfg = l.config;
  const std::size_t cond = condition_of(env.index());
  const inference::Batch batch = inference::sample_batch(env, cond, cfg.batch_size, l.rng);
  const std::vector<FeatureBatch> replayed = replay_batches(l, l.rng);

  ad::Tape tape;
  nn::Binder rep(tape, l.inference.representation);
  nn::Binder heads(tape, l.inference.heads);
  const std::span<const FeatureBatch> into_f =
      cfg.task_confusion ? std::span<const FeatureBatch>() : std::span<const FeatureBatch>(replayed);
  inference::Forward fw = inference::inference_loss(tape, rep, heads, l.inference, batch, l.global_step, l.rng, into_f);

  StepLosses losses{fw.total.value().item(), 0.0};
  ad::Var total = fw.total;
  if (cfg.task_confusion) {
    nn::Binder sol(tape, l.solver.params);
    ad::Var current = fw.h_support;
    std::vector<int> labels = batch.y_support;
    const auto past = l.past_snapshots();
    if (cfg.augment_ratio > 0.0 && !past.empty()) {
      Rng aug(cfg.seed ^ (0xbf58476d1ce4e5b9ULL * (l.global_step + 1)));
      const FeatureBatch merged =
          replay::augment_batch(past, FeatureBatch{current.value(), labels}, cfg.augment_ratio, aug);
      const std::size_t n_real = labels.size() - replay::generated_count(labels.size(), cfg.augment_ratio);
      std::vector<std::size_t> tail(merged.size() - n_real);
      for (std::size_t i = 0; i < tail.size(); ++i) tail[i] = n_real + i;
      current = ad::concat_rows(ad::slice_rows(current, 0, n_real), tape.constant(gather_rows(merged.h, tail)));
      labels = merged.y;
    }
    ad::Var sl = solver::solver_loss(sol, l.solver.dims, current, labels, replayed);
    losses.solver = sl.value().item();
    total = ad::add(total, sl);
  }
  if (!std::isfinite(total.value().item())) {
    throw NumericError(l.global_step, "non-finite training loss at environment " + std::to_string(env.index()));
  }
  tape.backward(total);
  adam_step(l.inference.representation, cfg.representation_optimizer);
  sgd_step(l.inference.heads, cfg.heads_optimizer);
  l.inference.representation.zero_grad();
  l.inference.heads.zero_grad();
  if (cfg.task_confusion) {
    sgd_step(l.solver.params, cfg.solver_optimizer);
    l.solver.params.zero_grad();
  }
  return losses;
}

MetricsRow eval_row(const Learner& l, std::size_t env, const StepLosses& losses) {
  MetricsRow r;
  r.global_step = l.global_step;
  r.env = env;
  r.method = to_string(l.config.method);
  const std::size_t seen = env + 1;
  double total = 0.0;
  for (std::size_t i = 0; i < seen; ++i) {
    const double acc = l.query_accuracy(i);
    if (i == 0) r.first_task_acc = acc;
    if (i == env) r.env_acc = acc;
    total += acc;
  }
  r.all_seen_acc = total / static_cast<double>(seen);
  r.loss_inference = losses.inference;
  r.loss_solver = losses.solver;
  return r;
}

}  // namespace

void Learner::train_next_env() {
  if (finished()) throw std::logic_error("every environment has already been presented");
  const std::size_t t = envs_done;
  const streams::Environment& env = stream[t];
  const std::size_t cond = condition_of(t);

  if (config.train_solver_from_scratch_per_env && t > 0) {
    solver = solver::SolverState::create(solver.dims, rng);
  }
  if (config.warmup && config.warmup_steps > 0) {
    inference::TrainSettings settings{config.batch_size, config.representation_optimizer, config.heads_optimizer};
    inference::warmup(inference, env, cond, config.warmup_steps, settings, global_step, rng);
  }

  StepLosses losses;
  for (std::size_t s = 0; s < config.steps_per_env; ++s) {
    losses = joint_step(*this, env);
    ++global_step;
    if ((s + 1) % config.eval_every == 0 && s + 1 < config.steps_per_env) log.append(eval_row(*this, t, losses));
  }

  if (config.snapshot) snapshots.push_back(replay::take_snapshot(inference, env, cond, config.with_encoder_snapshot));
  if (config.replay == ReplayKind::memory) {
    memory.store(t, FeatureBatch{features(t, env.support_x()), env.support_y()}, rng);
  }
  envs_done = t + 1;

  MetricsRow row = eval_row(*this, t, losses);
  if (config.estimate_bound) {
    // Estimators draw from their own generator so training is unaffected.
    Rng est(config.seed ^ (0x9e3779b97f4a7c15ULL * (t + 1)));
    estimators::BoundEstimate b = estimate_bound(*this, est);
    row.lambda_hat = b.envs.back().lambda_hat;
    row.kl_hat = b.kl_total();
    row.bound_rhs = b.rhs;
    row.bound_lhs = b.lhs;
    log.append_bound(std::move(b));
  }
  log.append(std::move(row));
}

estimators::BoundEstimate estimate_bound(const Learner& l, Rng& rng) {
  const auto access = streams::grant_eval_access();
  std::vector<FeatureBatch> supports, queries;
  std::vector<estimators::EnvEstimate> envs;
  const std::size_t seen = l.envs_done;
  if (seen == 0) throw std::logic_error("no environment has been presented yet");
  for (std::size_t i = 0; i < seen; ++i) {
    const auto& env = l.stream[i];
    FeatureBatch s{l.sampled_features(i, env.support_x(), rng), env.support_y()};
    FeatureBatch q{l.sampled_features(i, env.query_x(), rng), env.query_labels(access)};
    estimators::EnvEstimate e;
    e.env = i;
    e.eps_support = estimators::error_rate(l.predict(s.h), s.y);
    e.query_error = estimators::error_rate(l.predict(q.h), q.y);
    e.lambda_hat = estimators::estimate_lambda(s.h, q.h, rng, l.config.lambda);
    const replay::Snapshot* snap = l.snapshot_for(i);
    if (i + 1 < seen && snap != nullptr && l.config.task_confusion) {
      const auto kl = estimators::estimate_kl_term(*snap, l.solver, s, l.config.kl_samples, rng);
      e.kl_raw = kl.raw;
      e.kl_hat = kl.clamped;
    }
    envs.push_back(e);
    supports.push_back(std::move(s));
    queries.push_back(std::move(q));
  }
  const double c_star = estimators::estimate_c_star(supports, queries, l.config.dims.class_count, l.config.c_star);
  return estimators::compute_bound(seen, std::move(envs), c_star);
}

Learner run_learner(const streams::Stream& stream, const RunConfig& config) {
  Learner l = Learner::create(config, stream);
  while (!l.finished()) l.train_next_env();
  return l;
}

MetricsLog run_scenario(const streams::Stream& stream, const RunConfig& config) {
  return run_learner(stream, config).log;
}

}  // namespace condafr::orchestrator

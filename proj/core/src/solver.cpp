#include "condafr/solver.hpp"

#include <cmath>

#include "condafr/errors.hpp"
#include "condafr/eval_access.hpp"

namespace condafr::solver {

namespace {

struct Layers {
  nn::Linear l0, l1, l2;
};

Layers layers(const Dims& d) {
  return {nn::Linear{"solver.0", d.feature_dim, d.hidden_dim}, nn::Linear{"solver.1", d.hidden_dim, d.hidden_dim},
          nn::Linear{"solver.2", d.hidden_dim, d.class_count}};
}

double env_accuracy(const Predictor& predict, const FeatureFn& features, const streams::Environment& env) {
  const auto& labels = env.query_labels(streams::grant_eval_access());
  const auto pred = predict(features(env));
  std::size_t correct = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) continue;
    ++total;
    correct += pred[i] == labels[i] ? 1 : 0;
  }
  if (total == 0) throw DataError("env " + std::to_string(env.index()) + " has no labeled query rows to evaluate");
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace

SolverState SolverState::create(const Dims& dims, Rng& rng) {
  SolverState s{dims, {}};
  const Layers l = layers(dims);
  l.l0.init(s.params, rng);
  l.l1.init(s.params, rng);
  l.l2.init(s.params, rng);
  return s;
}

ad::Var logits(nn::Binder& params, const Dims& dims, ad::Var h) {
  if (h.cols() != dims.feature_dim) {
    throw ShapeError("solver expects feature width " + std::to_string(dims.feature_dim) + ", got " +
                     std::to_string(h.cols()));
  }
  const Layers l = layers(dims);
  ad::Var a = ad::relu(l.l0.forward(params, h));
  ad::Var b = ad::relu(l.l1.forward(params, a));
  return l.l2.forward(params, b);
}

Tensor logits(const SolverState& state, const Tensor& h) {
  ad::Tape tape;
  nn::Binder b(tape, state.params);
  return logits(b, state.dims, tape.constant(h)).value();
}

ad::Var solver_loss(nn::Binder& params, const Dims& dims, ad::Var h_current, std::span<const int> y_current,
                    std::span<const FeatureBatch> replayed) {
  ad::Tape& tape = params.tape();
  ad::Var total = tape.constant(Tensor::scalar(0.0));
  if (!y_current.empty()) total = ad::add(total, ad::softmax_cross_entropy(logits(params, dims, h_current), y_current));
  for (const FeatureBatch& r : replayed) {
    if (r.empty()) continue;
    total = ad::add(total, ad::softmax_cross_entropy(logits(params, dims, tape.constant(r.h)), r.y));
  }
  return total;
}

std::vector<int> predict(const SolverState& state, const Tensor& h) { return ad::argmax_rows(logits(state, h)); }

double mean_nll(const SolverState& state, const FeatureBatch& batch) {
  if (batch.empty()) return 0.0;
  ad::Tape tape;
  nn::Binder b(tape, state.params);
  return ad::softmax_cross_entropy(logits(b, state.dims, tape.constant(batch.h)), batch.y).value().item();
}

void fit(SolverState& state, const FeatureBatch& data, std::size_t steps, std::size_t batch_size,
         const SgdOptions& optimizer, Rng& rng) {
  if (data.empty()) return;
  for (std::size_t s = 0; s < steps; ++s) {
    const FeatureBatch mb = sample_rows(data.h, data.y, batch_size, rng);
    ad::Tape tape;
    nn::Binder b(tape, state.params);
    ad::Var loss = ad::softmax_cross_entropy(logits(b, state.dims, tape.constant(mb.h)), mb.y);
    tape.backward(loss);
    sgd_step(state.params, optimizer);
    state.params.zero_grad();
  }
}

double evaluate_accuracy(const Predictor& predict, const FeatureFn& features,
                         std::span<const streams::Environment> seen, EvalScope scope, std::size_t env) {
  if (seen.empty()) throw DataError("no environments have been presented yet");
  switch (scope) {
    case EvalScope::first_task: return env_accuracy(predict, features, seen.front());
    case EvalScope::env:
      if (env >= seen.size()) throw DataError("env " + std::to_string(env) + " has not been presented yet");
      return env_accuracy(predict, features, seen[env]);
    case EvalScope::all_seen: {
      double total = 0.0;
      for (const auto& e : seen) total += env_accuracy(predict, features, e);
      return total / static_cast<double>(seen.size());
    }
  }
  return 0.0;
}

}  // namespace condafr::solver

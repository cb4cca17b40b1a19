#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "condafr/autodiff.hpp"
#include "condafr/batch.hpp"
#include "condafr/nn.hpp"
#include "condafr/optim.hpp"
#include "condafr/rng.hpp"

namespace condafr::streams {
class Environment;
}

namespace condafr::solver {

struct Dims {
  std::size_t feature_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t class_count = 2;
};

/// Two-hidden-layer classifier over domain-agnostic features.
struct SolverState {
  Dims dims;
  ParamStore params;

  static SolverState create(const Dims& dims, Rng& rng);
};

ad::Var logits(nn::Binder& params, const Dims& dims, ad::Var h);
Tensor logits(const SolverState& state, const Tensor& h);

/// CE on the current features plus one CE term per replayed batch. Empty
/// current or replay batches contribute nothing.
ad::Var solver_loss(nn::Binder& params, const Dims& dims, ad::Var h_current, std::span<const int> y_current,
                    std::span<const FeatureBatch> replayed);

std::vector<int> predict(const SolverState& state, const Tensor& h);

/// Mean negative log-likelihood of `batch` under the solver (0 when empty).
double mean_nll(const SolverState& state, const FeatureBatch& batch);

/// Trains a solver with SGD on a fixed labeled set, sampling minibatches.
void fit(SolverState& state, const FeatureBatch& data, std::size_t steps, std::size_t batch_size,
         const SgdOptions& optimizer, Rng& rng);

enum class EvalScope { first_task, env, all_seen };

/// Features for env i as seen at evaluation time.
using FeatureFn = std::function<Tensor(const streams::Environment& env)>;
using Predictor = std::function<std::vector<int>(const Tensor& h)>;

/// Query accuracy against the hidden labels (rows labeled -1 are skipped).
/// `seen` is the prefix of environments presented so far; `env` selects the
/// environment for EvalScope::env. all_seen weights environments equally.
double evaluate_accuracy(const Predictor& predict, const FeatureFn& features,
                         std::span<const streams::Environment> seen, EvalScope scope, std::size_t env = 0);

}  // namespace condafr::solver

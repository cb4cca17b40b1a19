#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "condafr/autodiff.hpp"
#include "condafr/batch.hpp"
#include "condafr/nn.hpp"
#include "condafr/optim.hpp"
#include "condafr/rng.hpp"

namespace condafr::streams {
class Environment;
}

namespace condafr::inference {

struct Dims {
  std::size_t input_dim = 2;
  std::size_t condition_count = 1;
  std::size_t class_count = 2;
  std::size_t latent_dim = 8;
  std::size_t feature_dim = 32;
  std::size_t hidden_dim = 64;
};

/// Gradient-reversal coefficient ramp: 2a / (1 + exp(-i / horizon)) - a.
struct GrlSchedule {
  double amplitude = 0.3;
  double horizon = 2000.0;
};

double grl_coeff(const GrlSchedule& schedule, std::uint64_t step);

struct Options {
  double beta = 1.0;       // weight of the discrepancy term
  double kl_weight = 1.0;  // weight of the posterior KL term
  double margin = 4.0;     // MDD margin gamma on the support term
  GrlSchedule grl;
};

/// Layer layout shared by the live state, snapshots and tests.
struct Architecture {
  nn::Linear encoder_hidden;
  nn::Linear encoder_mu;
  nn::Linear encoder_logvar;
  nn::Linear decoder;
  nn::BatchNorm decoder_norm;
  nn::Mlp2 hypothesis;  // f
  nn::Mlp2 adversary;   // f'

  static Architecture of(const Dims& dims);
};

/// Encoder q(z|x,c) and decoder g(z,c) parameters live in `representation`
/// (optimized with Adam); the hypothesis pair f, f' lives in `heads`
/// (optimized with SGD).
struct InferenceState {
  Dims dims;
  Options options;
  ParamStore representation;
  ParamStore heads;

  static InferenceState create(const Dims& dims, const Options& options, Rng& rng);
};

struct Posterior {
  ad::Var mu;
  ad::Var logvar;
};

Posterior encode(nn::Binder& representation, const Dims& dims, ad::Var x, std::size_t condition);
ad::Var decode(nn::Binder& representation, const Dims& dims, ad::Var z, std::size_t condition, bool training);
ad::Var hypothesis(nn::Binder& heads, const Dims& dims, ad::Var h);
ad::Var adversary(nn::Binder& heads, const Dims& dims, ad::Var h);

/// Evaluation-mode helpers; no gradients, running batch-norm statistics.
std::pair<Tensor, Tensor> encode(const ParamStore& representation, const Dims& dims, const Tensor& x,
                                 std::size_t condition);
Tensor decode(const ParamStore& representation, const Dims& dims, const Tensor& z, std::size_t condition);
/// Deterministic feature path: decode(mu(x, c), c).
Tensor infer_features(const ParamStore& representation, const Dims& dims, const Tensor& x, std::size_t condition);
/// One draw from the stochastic feature path: decode(mu + sigma * eps, c).
Tensor sample_features(const ParamStore& representation, const Dims& dims, const Tensor& x, std::size_t condition,
                       Rng& rng);
Tensor hypothesis_logits(const ParamStore& heads, const Dims& dims, const Tensor& h);

struct Disparity {
  ad::Var support;  // margin * CE(f'(h_s), argmax f(h_s))
  ad::Var query;    // -log(1 - softmax(f'(h_q))[argmax f(h_q)])
};

/// Margin disparity discrepancy terms. f' sees h through a gradient-reversal
/// node with `coeff`, so descending these terms trains f' to disagree with f
/// on the query while the feature side receives the reversed signal. f
/// enters only through argmax and therefore gets no gradient here.
Disparity mdd_loss(nn::Binder& heads, const Dims& dims, ad::Var h_support, ad::Var h_query, double margin,
                   double coeff);

struct Batch {
  Tensor x_support;
  std::vector<int> y_support;
  Tensor x_query;
  std::size_t condition = 0;
};

struct Forward {
  ad::Var total;
  ad::Var classification;
  ad::Var kl;
  Disparity disparity;
  ad::Var h_support;
  ad::Var h_query;
  double coeff = 0.0;
};

/// Builds CE(f(h_S), y_S) + kl_weight * KL + beta * (disparity terms) on
/// `tape`, with z drawn by reparameterization from `rng`. Extra labeled
/// feature batches in `extra_f_terms` add CE terms on f (replay into f).
Forward inference_loss(ad::Tape& tape, nn::Binder& representation, nn::Binder& heads, const InferenceState& state,
                       const Batch& batch, std::uint64_t step, Rng& rng,
                       std::span<const FeatureBatch> extra_f_terms = {});

struct TrainSettings {
  std::size_t batch_size = 64;
  AdamOptions representation_optimizer{1e-3};
  SgdOptions heads_optimizer{1e-2, 0.9, 5e-4, true};
};

/// Draws a training batch for `env` (rows sampled with replacement).
Batch sample_batch(const streams::Environment& env, std::size_t condition, std::size_t batch_size, Rng& rng);

/// Optimizes the inference objective alone for `steps` iterations. Advances
/// `global_step`, which drives the gradient-reversal schedule.
void warmup(InferenceState& state, const streams::Environment& env, std::size_t condition, std::size_t steps,
            const TrainSettings& settings, std::uint64_t& global_step, Rng& rng);

}  // namespace condafr::inference

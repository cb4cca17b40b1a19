#include "condafr/inference.hpp"

#include <cmath>

#include "condafr/errors.hpp"
#include "condafr/streams.hpp"

namespace condafr::inference {

namespace {

void require_condition(const Dims& dims, std::size_t condition) {
  if (condition >= dims.condition_count) {
    throw ShapeError("condition " + std::to_string(condition) + " outside [0, " +
                     std::to_string(dims.condition_count) + ")");
  }
}

ad::Var with_condition(ad::Var x, std::size_t width, std::size_t condition) {
  return ad::concat_cols(x, x.tape->constant(one_hot_rows(x.rows(), width, condition)));
}

}  // namespace

double grl_coeff(const GrlSchedule& s, std::uint64_t step) {
  const double i = static_cast<double>(step);
  return 2.0 * s.amplitude / (1.0 + std::exp(-i / s.horizon)) - s.amplitude;
}

Architecture Architecture::of(const Dims& d) {
  return Architecture{
      nn::Linear{"encoder.hidden", d.input_dim + d.condition_count, d.hidden_dim},
      nn::Linear{"encoder.mu", d.hidden_dim, d.latent_dim},
      nn::Linear{"encoder.logvar", d.hidden_dim, d.latent_dim},
      nn::Linear{"decoder.linear", d.latent_dim + d.condition_count, d.feature_dim},
      nn::BatchNorm{"decoder.norm", d.feature_dim},
      nn::Mlp2::make("f", d.feature_dim, d.hidden_dim, d.class_count),
      nn::Mlp2::make("f_adv", d.feature_dim, d.hidden_dim, d.class_count),
  };
}

InferenceState InferenceState::create(const Dims& dims, const Options& options, Rng& rng) {
  if (dims.condition_count == 0 || dims.class_count == 0 || dims.input_dim == 0) {
    throw ShapeError("inference dimensions must be positive");
  }
  InferenceState s{dims, options, {}, {}};
  const Architecture a = Architecture::of(dims);
  a.encoder_hidden.init(s.representation, rng);
  a.encoder_mu.init(s.representation, rng);
  a.encoder_logvar.init(s.representation, rng);
  a.decoder.init(s.representation, rng);
  a.decoder_norm.init(s.representation);
  a.hypothesis.init(s.heads, rng);
  a.adversary.init(s.heads, rng);
  return s;
}

Posterior encode(nn::Binder& rep, const Dims& dims, ad::Var x, std::size_t condition) {
  require_condition(dims, condition);
  if (x.cols() != dims.input_dim) {
    throw ShapeError("encode: input width " + std::to_string(x.cols()) + " but encoder expects " +
                     std::to_string(dims.input_dim));
  }
  const Architecture a = Architecture::of(dims);
  ad::Var hidden = ad::relu(a.encoder_hidden.forward(rep, with_condition(x, dims.condition_count, condition)));
  return {a.encoder_mu.forward(rep, hidden), a.encoder_logvar.forward(rep, hidden)};
}

ad::Var decode(nn::Binder& rep, const Dims& dims, ad::Var z, std::size_t condition, bool training) {
  require_condition(dims, condition);
  if (z.cols() != dims.latent_dim) {
    throw ShapeError("decode: latent width " + std::to_string(z.cols()) + " but decoder expects " +
                     std::to_string(dims.latent_dim));
  }
  const Architecture a = Architecture::of(dims);
  ad::Var pre = ad::relu(a.decoder.forward(rep, with_condition(z, dims.condition_count, condition)));
  return a.decoder_norm.forward(rep, pre, training);
}

ad::Var hypothesis(nn::Binder& heads, const Dims& dims, ad::Var h) {
  return Architecture::of(dims).hypothesis.forward(heads, h);
}

ad::Var adversary(nn::Binder& heads, const Dims& dims, ad::Var h) {
  return Architecture::of(dims).adversary.forward(heads, h);
}

std::pair<Tensor, Tensor> encode(const ParamStore& rep, const Dims& dims, const Tensor& x, std::size_t condition) {
  ad::Tape tape;
  nn::Binder b(tape, rep);
  Posterior p = encode(b, dims, tape.constant(x), condition);
  return {p.mu.value(), p.logvar.value()};
}

Tensor decode(const ParamStore& rep, const Dims& dims, const Tensor& z, std::size_t condition) {
  ad::Tape tape;
  nn::Binder b(tape, rep);
  return decode(b, dims, tape.constant(z), condition, false).value();
}

Tensor infer_features(const ParamStore& rep, const Dims& dims, const Tensor& x, std::size_t condition) {
  ad::Tape tape;
  nn::Binder b(tape, rep);
  Posterior p = encode(b, dims, tape.constant(x), condition);
  return decode(b, dims, p.mu, condition, false).value();
}

Tensor sample_features(const ParamStore& rep, const Dims& dims, const Tensor& x, std::size_t condition, Rng& rng) {
  auto [mu, logvar] = encode(rep, dims, x, condition);
  const Tensor eps = rng.normal_matrix(mu.rows(), mu.cols());
  Tensor z = mu;
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += std::exp(0.5 * logvar[i]) * eps[i];
  return decode(rep, dims, z, condition);
}

Tensor hypothesis_logits(const ParamStore& heads, const Dims& dims, const Tensor& h) {
  ad::Tape tape;
  nn::Binder b(tape, heads);
  return hypothesis(b, dims, tape.constant(h)).value();
}

namespace {

Disparity disparity_terms(nn::Binder& heads, const Dims& dims, ad::Var h_support, ad::Var h_query,
                          std::span<const int> f_support, std::span<const int> f_query, double margin, double coeff) {
  ad::Var adv_support = adversary(heads, dims, ad::gradient_reverse(h_support, coeff));
  ad::Var adv_query = adversary(heads, dims, ad::gradient_reverse(h_query, coeff));
  return {ad::scale(ad::softmax_cross_entropy(adv_support, f_support), margin),
          ad::log_one_minus_softmax(adv_query, f_query)};
}

}  // namespace

Disparity mdd_loss(nn::Binder& heads, const Dims& dims, ad::Var h_support, ad::Var h_query, double margin,
                   double coeff) {
  // Pseudo-labels from f are piecewise constant in its parameters.
  const auto f_support = ad::argmax_rows(hypothesis(heads, dims, h_support).value());
  const auto f_query = ad::argmax_rows(hypothesis(heads, dims, h_query).value());
  return disparity_terms(heads, dims, h_support, h_query, f_support, f_query, margin, coeff);
}

Forward inference_loss(ad::Tape& tape, nn::Binder& rep, nn::Binder& heads, const InferenceState& state,
                       const Batch& batch, std::uint64_t step, Rng& rng, std::span<const FeatureBatch> extra_f_terms) {
  const Dims& dims = state.dims;
  const Options& opt = state.options;
  const std::size_t ns = batch.x_support.rows();
  const std::size_t nq = batch.x_query.rows();

  Posterior ps = encode(rep, dims, tape.constant(batch.x_support), batch.condition);
  Posterior pq = encode(rep, dims, tape.constant(batch.x_query), batch.condition);
  ad::Var zs = ad::reparameterize(ps.mu, ps.logvar, rng.normal_matrix(ns, dims.latent_dim));
  ad::Var zq = ad::reparameterize(pq.mu, pq.logvar, rng.normal_matrix(nq, dims.latent_dim));
  // Support and query share one normalization batch.
  ad::Var h = decode(rep, dims, ad::concat_rows(zs, zq), batch.condition, true);
  ad::Var hs = ad::slice_rows(h, 0, ns);
  ad::Var hq = ad::slice_rows(h, ns, ns + nq);

  ad::Var logits_s = hypothesis(heads, dims, hs);
  ad::Var ce = ad::softmax_cross_entropy(logits_s, batch.y_support);
  for (const FeatureBatch& extra : extra_f_terms) {
    if (extra.empty()) continue;
    ce = ad::add(ce, ad::softmax_cross_entropy(hypothesis(heads, dims, tape.constant(extra.h)), extra.y));
  }
  ad::Var kl = ad::gaussian_kl(ps.mu, ps.logvar);
  const double coeff = grl_coeff(opt.grl, step);
  const auto f_support = ad::argmax_rows(logits_s.value());
  const auto f_query = ad::argmax_rows(hypothesis(heads, dims, hq).value());
  Disparity d = disparity_terms(heads, dims, hs, hq, f_support, f_query, opt.margin, coeff);

  ad::Var total = ad::add(ce, ad::scale(kl, opt.kl_weight));
  if (opt.beta != 0.0) total = ad::add(total, ad::scale(ad::add(d.support, d.query), opt.beta));
  return Forward{total, ce, kl, d, hs, hq, coeff};
}

Batch sample_batch(const streams::Environment& env, std::size_t condition, std::size_t batch_size, Rng& rng) {
  FeatureBatch s = sample_rows(env.support_x(), env.support_y(), batch_size, rng);
  Tensor q = sample_rows(env.query_x(), batch_size, rng);
  return Batch{std::move(s.h), std::move(s.y), std::move(q), condition};
}

void warmup(InferenceState& state, const streams::Environment& env, std::size_t condition, std::size_t steps,
            const TrainSettings& settings, std::uint64_t& global_step, Rng& rng) {
  for (std::size_t i = 0; i < steps; ++i) {
    const Batch batch = sample_batch(env, condition, settings.batch_size, rng);
    ad::Tape tape;
    nn::Binder rep(tape, state.representation);
    nn::Binder heads(tape, state.heads);
    Forward fw = inference_loss(tape, rep, heads, state, batch, global_step, rng);
    if (!std::isfinite(fw.total.value().item())) {
      throw NumericError(global_step, "non-finite inference loss during warmup");
    }
    tape.backward(fw.total);
    adam_step(state.representation, settings.representation_optimizer);
    sgd_step(state.heads, settings.heads_optimizer);
    state.representation.zero_grad();
    state.heads.zero_grad();
    ++global_step;
  }
}

}  // namespace condafr::inference

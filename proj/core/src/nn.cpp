#include "condafr/nn.hpp"

#include <cmath>

namespace condafr::nn {

Binder::Binder(ad::Tape& tape, ParamStore& store) : tape_(&tape), live_store_(&store), store_(&store) {}

Binder::Binder(ad::Tape& tape, const ParamStore& store) : tape_(&tape), live_store_(nullptr), store_(&store) {}

ad::Var Binder::operator()(std::string_view name) {
  if (auto it = cache_.find(name); it != cache_.end()) return it->second;
  ad::Var v = live_store_ ? tape_->param(live_store_->at(name)) : tape_->constant(store_->at(name).value);
  cache_.emplace(std::string(name), v);
  return v;
}

void Linear::init(ParamStore& store, Rng& rng) const {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Tensor w = Tensor::matrix(in, out);
  for (double& v : w.values()) v = (2.0 * rng.uniform() - 1.0) * bound;
  Tensor b = Tensor::matrix(1, out);
  for (double& v : b.values()) v = (2.0 * rng.uniform() - 1.0) * bound;
  store.add(name + ".weight", std::move(w));
  store.add(name + ".bias", std::move(b));
}

ad::Var Linear::forward(Binder& params, ad::Var x) const {
  return ad::add_bias(ad::matmul(x, params(name + ".weight")), params(name + ".bias"));
}

void BatchNorm::init(ParamStore& store) const {
  store.add(name + ".gamma", Tensor::matrix(1, dim, 1.0));
  store.add(name + ".beta", Tensor::matrix(1, dim, 0.0));
  store.add(name + ".running_mean", Tensor::matrix(1, dim, 0.0), false);
  store.add(name + ".running_var", Tensor::matrix(1, dim, 1.0), false);
}

ad::Var BatchNorm::forward(Binder& params, ad::Var x, bool training) const {
  ad::Var gamma = params(name + ".gamma");
  ad::Var beta = params(name + ".beta");
  if (!training) {
    const ParamStore& s = params.store();
    return ad::batch_norm_fixed(x, gamma, beta, s.at(name + ".running_mean").value.values(),
                                s.at(name + ".running_var").value.values(), eps);
  }
  ad::BatchStats stats;
  ad::Var y = ad::batch_norm(x, gamma, beta, eps, &stats);
  if (ParamStore* live = params.live_store()) {
    auto rm = live->at(name + ".running_mean").value.values();
    auto rv = live->at(name + ".running_var").value.values();
    const double n = static_cast<double>(x.rows());
    for (std::size_t c = 0; c < dim; ++c) {
      rm[c] = (1.0 - momentum) * rm[c] + momentum * stats.mean[c];
      // Running variance tracks the unbiased estimate.
      rv[c] = (1.0 - momentum) * rv[c] + momentum * stats.var[c] * n / (n - 1.0);
    }
  }
  return y;
}

Mlp2 Mlp2::make(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out) {
  return Mlp2{Linear{name + ".hidden", in, hidden}, Linear{name + ".output", hidden, out}};
}

void Mlp2::init(ParamStore& store, Rng& rng) const {
  hidden.init(store, rng);
  output.init(store, rng);
}

ad::Var Mlp2::forward(Binder& params, ad::Var x) const {
  return output.forward(params, ad::relu(hidden.forward(params, x)));
}

}  // namespace condafr::nn

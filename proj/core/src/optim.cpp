#include "condafr/optim.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace condafr {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv_mix(std::uint64_t& h, const void* bytes, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

}  // namespace

Parameter& ParamStore::add(std::string name, Tensor init, bool trainable) {
  if (params_.contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  Parameter p;
  p.grad = Tensor(init.shape());
  p.first_moment = Tensor(init.shape());
  p.second_moment = Tensor(init.shape());
  p.value = std::move(init);
  p.trainable = trainable;
  return params_.emplace(std::move(name), std::move(p)).first->second;
}

Parameter& ParamStore::at(std::string_view name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("no parameter '" + std::string(name) + "'");
  return it->second;
}

const Parameter& ParamStore::at(std::string_view name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("no parameter '" + std::string(name) + "'");
  return it->second;
}

bool ParamStore::contains(std::string_view name) const { return params_.find(name) != params_.end(); }

void ParamStore::zero_grad() {
  for (auto& [_, p] : params_) p.grad.fill(0.0);
}

void ParamStore::reset_optimizer_state() {
  for (auto& [_, p] : params_) {
    p.grad.fill(0.0);
    p.first_moment.fill(0.0);
    p.second_moment.fill(0.0);
  }
  step_ = 0;
}

std::uint64_t ParamStore::value_hash() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& [name, p] : params_) {
    fnv_mix(h, name.data(), name.size());
    fnv_mix(h, p.value.data(), p.value.size() * sizeof(double));
  }
  return h;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.value.size();
  return n;
}

void adam_step(ParamStore& store, const AdamOptions& o) {
  store.bump_step();
  const double t = static_cast<double>(store.step());
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);
  for (auto& [_, p] : store) {
    if (!p.trainable) continue;
    auto w = p.value.values();
    auto g = p.grad.values();
    auto m = p.first_moment.values();
    auto v = p.second_moment.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] -= o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
  }
}

// Nesterov in the form used by common frameworks:
//   g <- g + wd * w;  v <- mu * v + g;  w <- w - lr * (g + mu * v)
void sgd_step(ParamStore& store, const SgdOptions& o) {
  store.bump_step();
  for (auto& [_, p] : store) {
    if (!p.trainable) continue;
    auto w = p.value.values();
    auto g = p.grad.values();
    auto vel = p.first_moment.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double grad = g[i] + o.weight_decay * w[i];
      vel[i] = o.momentum * vel[i] + grad;
      const double update = o.nesterov ? grad + o.momentum * vel[i] : vel[i];
      w[i] -= o.lr * update;
    }
  }
}

}  // namespace condafr

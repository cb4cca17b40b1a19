#pragma once

#include <map>
#include <string>
#include <string_view>

#include "condafr/autodiff.hpp"
#include "condafr/optim.hpp"
#include "condafr/rng.hpp"

namespace condafr::nn {

/// Resolves parameter names to tape variables.
///
/// A live binder exposes trainable leaves whose gradients flow back into the
/// store; a frozen binder exposes copies as constants (snapshots, evaluation).
class Binder {
 public:
  Binder(ad::Tape& tape, ParamStore& store);
  Binder(ad::Tape& tape, const ParamStore& store);

  ad::Var operator()(std::string_view name);
  ad::Tape& tape() noexcept { return *tape_; }
  bool live() const noexcept { return live_store_ != nullptr; }
  /// Writable store for running statistics; null when frozen.
  ParamStore* live_store() noexcept { return live_store_; }
  const ParamStore& store() const noexcept { return *store_; }

 private:
  ad::Tape* tape_;
  ParamStore* live_store_;
  const ParamStore* store_;
  std::map<std::string, ad::Var, std::less<>> cache_;
};

/// Dense layer with weight [in x out] and bias [1 x out], initialized
/// uniformly in +-1/sqrt(in).
struct Linear {
  std::string name;
  std::size_t in = 0;
  std::size_t out = 0;

  void init(ParamStore& store, Rng& rng) const;
  ad::Var forward(Binder& params, ad::Var x) const;
};

/// Batch normalization over columns with learned scale/shift and running
/// statistics kept as non-trainable store entries.
struct BatchNorm {
  std::string name;
  std::size_t dim = 0;
  double momentum = 0.1;
  double eps = 1e-5;

  void init(ParamStore& store) const;
  /// Training mode standardizes with batch statistics (needs >= 2 rows) and,
  /// for a live binder, updates the running averages. Evaluation mode uses
  /// the running averages and accepts any batch size.
  ad::Var forward(Binder& params, ad::Var x, bool training) const;
};

/// Two-layer perceptron: Linear -> ReLU -> Linear.
struct Mlp2 {
  Linear hidden;
  Linear output;

  static Mlp2 make(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out);
  void init(ParamStore& store, Rng& rng) const;
  ad::Var forward(Binder& params, ad::Var x) const;
};

}  // namespace condafr::nn

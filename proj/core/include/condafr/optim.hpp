#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "condafr/tensor.hpp"

namespace condafr {

/// One named tensor with its gradient buffer and optimizer moments.
///
/// Non-trainable entries (batch-norm running statistics) live in the same
/// store so that a snapshot is a single copy, but optimizers skip them.
struct Parameter {
  Tensor value;
  Tensor grad;
  Tensor first_moment;   // Adam m, or SGD velocity
  Tensor second_moment;  // Adam v
  bool trainable = true;
};

class ParamStore {
 public:
  using Map = std::map<std::string, Parameter, std::less<>>;

  Parameter& add(std::string name, Tensor init, bool trainable = true);
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::size_t size() const noexcept { return params_.size(); }
  Map::iterator begin() noexcept { return params_.begin(); }
  Map::iterator end() noexcept { return params_.end(); }
  Map::const_iterator begin() const noexcept { return params_.begin(); }
  Map::const_iterator end() const noexcept { return params_.end(); }

  void zero_grad();
  /// Clears gradients and optimizer moments and resets the step counter.
  void reset_optimizer_state();

  std::uint64_t step() const noexcept { return step_; }
  void set_step(std::uint64_t step) noexcept { step_ = step; }
  void bump_step() noexcept { ++step_; }

  /// FNV-1a over names and the raw bytes of every value.
  std::uint64_t value_hash() const;
  /// Number of scalar values across all entries.
  std::size_t scalar_count() const;

 private:
  Map params_;
  std::uint64_t step_ = 0;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct SgdOptions {
  double lr = 1e-2;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  bool nesterov = true;
};

void adam_step(ParamStore& store, const AdamOptions& options);
void sgd_step(ParamStore& store, const SgdOptions& options);

}  // namespace condafr

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "condafr/optim.hpp"
#include "condafr/tensor.hpp"

namespace condafr::ad {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Records a computation in topological order and replays it backwards.
///
/// Nodes are appended as operations execute, so the node order is always a
/// valid topological order. `backward` walks the nodes once in reverse,
/// accumulating into gradient buffers, and finally adds the gradients of
/// parameter-bound leaves into their ParamStore entries.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// A value that never receives gradient.
  Var constant(Tensor value);
  /// A free leaf whose gradient can be read back with grad().
  Var leaf(Tensor value);
  /// A leaf bound to `param`; backward() adds its gradient into param.grad.
  Var param(Parameter& param);

  /// Appends an operation node. `backward` is dropped when no input needs
  /// gradient, which makes the node a constant.
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  /// Gradient reached by the last backward pass; zeros if none arrived.
  Tensor grad(Var v) const;

  /// Adds `g` into the gradient buffer of node `id` (no-op for constants).
  void accumulate(std::size_t id, const Tensor& g);
  void accumulate(Var v, const Tensor& g) { accumulate(v.id, g); }

  /// Backpropagates from a single-element root seeded with 1.
  void backward(Var root);
  void backward(Var root, const Tensor& seed);

  std::size_t size() const noexcept { return nodes_.size(); }
  /// True when every node value is finite.
  bool all_finite() const;

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // empty until something accumulates into it
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* bound = nullptr;
  };
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// Linear algebra and elementwise ---------------------------------------------

/// [m x k] * [k x n]. Rejects mismatched inner extents, naming both shapes.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product of equal shapes.
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// x[n x d] + b, where b holds d values (shape {d} or {1, d}).
Var add_bias(Var x, Var bias);
/// max(0, x); the subgradient at 0 is 0.
Var relu(Var x);
/// Sum of all elements, shape {1}.
Var sum(Var x);
Var concat_cols(Var left, Var right);
Var concat_rows(Var top, Var bottom);
Var slice_rows(Var x, std::size_t begin, std::size_t end);

// Normalization --------------------------------------------------------------

struct BatchStats {
  std::vector<double> mean;
  std::vector<double> var;  // biased
};

/// Per-column batch standardization followed by gamma * x_hat + beta.
/// Rejects batches of fewer than two rows. Fills `stats` when non-null.
Var batch_norm(Var x, Var gamma, Var beta, double eps, BatchStats* stats = nullptr);
/// Same transform using fixed statistics (running averages).
Var batch_norm_fixed(Var x, Var gamma, Var beta, std::span<const double> mean,
                     std::span<const double> var, double eps);

// Losses and probabilistic layers -------------------------------------------

/// Mean over rows of -log softmax(logits)[label]. Returns 0 for an empty
/// batch. Labels outside [0, K) are rejected.
Var softmax_cross_entropy(Var logits, std::span<const int> labels);
/// Mean over rows of -log(1 - softmax(logits)[label]), with the probability
/// capped at 1 - clamp. Returns 0 for an empty batch.
Var log_one_minus_softmax(Var logits, std::span<const int> labels, double clamp = 1e-7);
/// Mean over rows of 0.5 * sum_d (mu^2 + exp(logvar) - 1 - logvar).
Var gaussian_kl(Var mu, Var logvar);
/// mu + exp(logvar / 2) * noise. `noise` is a constant supplied by the caller.
Var reparameterize(Var mu, Var logvar, const Tensor& noise);
/// Identity forward; backward multiplies the upstream gradient by -coeff.
Var gradient_reverse(Var x, double coeff);

// Plain-tensor helpers shared with evaluation code ----------------------------

/// Row-wise argmax; ties resolve to the lowest index.
std::vector<int> argmax_rows(const Tensor& logits);
/// Row-wise softmax probabilities.
Tensor softmax_rows(const Tensor& logits);
/// Dense product without a tape.
Tensor matmul(const Tensor& a, const Tensor& b);

}  // namespace condafr::ad

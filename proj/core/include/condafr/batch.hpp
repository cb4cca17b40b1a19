#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "condafr/rng.hpp"
#include "condafr/tensor.hpp"

namespace condafr {

/// Feature rows with one class label per row.
struct FeatureBatch {
  Tensor h = Tensor::matrix(0, 0);
  std::vector<int> y;

  std::size_t size() const noexcept { return y.size(); }
  bool empty() const noexcept { return y.empty(); }
};

/// Rows drawn uniformly with replacement.
FeatureBatch sample_rows(const Tensor& x, std::span<const int> y, std::size_t n, Rng& rng);
Tensor sample_rows(const Tensor& x, std::size_t n, Rng& rng);
/// Stacks batches of equal width; an empty list yields an empty batch of width `width`.
FeatureBatch concat(std::span<const FeatureBatch> parts, std::size_t width);

}  // namespace condafr

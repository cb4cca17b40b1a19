#include "condafr/batch.hpp"

#include <algorithm>

#include "condafr/errors.hpp"

namespace condafr {

FeatureBatch sample_rows(const Tensor& x, std::span<const int> y, std::size_t n, Rng& rng) {
  if (x.rows() != y.size()) throw ShapeError("sample_rows: row and label counts differ");
  if (x.rows() == 0 && n > 0) throw DataError("sample_rows: cannot sample from an empty set");
  const auto idx = rng.sample_indices(x.rows(), n);
  FeatureBatch out{gather_rows(x, idx), {}};
  out.y.reserve(n);
  for (std::size_t i : idx) out.y.push_back(y[i]);
  return out;
}

Tensor sample_rows(const Tensor& x, std::size_t n, Rng& rng) {
  if (x.rows() == 0) return Tensor::matrix(0, x.cols());
  return gather_rows(x, rng.sample_indices(x.rows(), n));
}

FeatureBatch concat(std::span<const FeatureBatch> parts, std::size_t width) {
  FeatureBatch out{Tensor::matrix(0, width), {}};
  for (const auto& p : parts) {
    if (p.empty()) continue;
    out.h = vstack(out.h, p.h);
    out.y.insert(out.y.end(), p.y.begin(), p.y.end());
  }
  return out;
}

}  // namespace condafr

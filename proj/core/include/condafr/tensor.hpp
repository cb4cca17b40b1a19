#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace condafr {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);

/// Dense row-major array of doubles.
///
/// Most of the library works with rank-2 tensors (a batch of rows); scalars
/// produced by losses have shape {1}. A leading extent of zero is allowed so
/// that empty batches flow through the same code paths.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  static Tensor scalar(double value);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  /// Leading extent for rank-2 tensors, 1 for rank-1.
  std::size_t rows() const {
    if (shape_.size() == 2) return shape_[0];
    if (shape_.size() != 1) bad_rank("rows()");
    return 1;
  }
  /// Trailing extent for rank-2 tensors, the length for rank-1.
  std::size_t cols() const {
    if (shape_.size() == 2) return shape_[1];
    if (shape_.size() != 1) bad_rank("cols()");
    return shape_[0];
  }

  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  /// Value of a single-element tensor.
  double item() const;
  bool all_finite() const noexcept;
  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

  void fill(double value);
  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double factor);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  [[noreturn]] void bad_rank(const char* what) const;

  Shape shape_;
  std::vector<double> values_;
};

/// Selects rows by index into a new rank-2 tensor.
Tensor gather_rows(const Tensor& source, std::span<const std::size_t> indices);
/// Stacks two rank-2 tensors with equal column count.
Tensor vstack(const Tensor& top, const Tensor& bottom);
/// One-hot rows of width `width`, all set at column `index`.
Tensor one_hot_rows(std::size_t rows, std::size_t width, std::size_t index);

}  // namespace condafr

#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace backtrack {

// Dense row-major tensor of 64-bit floats. Plain value type: copyable,
// movable, safe to hand between threads. Everything at desk scale runs in
// double precision so gradient checks stay tight.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<double> values);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double value);
  static Tensor scalar(double value) { return Tensor({1}, {value}); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return values_.size(); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  // 2-d element access; rank must be 2.
  double& at(int row, int col);
  double at(int row, int col) const;

  int rows() const;
  int cols() const;

  double item() const;  // rank-agnostic scalar read; size must be 1
  bool all_finite() const;
  void fill(double value);

  std::string shape_str() const;

 private:
  std::vector<int> shape_;
  std::vector<double> values_;
};

std::size_t shape_product(const std::vector<int>& shape);

}  // namespace backtrack

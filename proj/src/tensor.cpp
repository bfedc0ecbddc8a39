#include "backtrack/tensor.hpp"

#include <cmath>
#include <sstream>

#include "backtrack/error.hpp"

namespace backtrack {

std::size_t shape_product(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw DimensionError("negative dimension in shape");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), values_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_product(shape_)) {
    throw DimensionError("value count " + std::to_string(values_.size()) +
                         " does not match shape " + shape_str());
  }
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

double& Tensor::at(int row, int col) {
  return values_[static_cast<std::size_t>(row) * static_cast<std::size_t>(shape_[1]) +
                 static_cast<std::size_t>(col)];
}

double Tensor::at(int row, int col) const {
  return values_[static_cast<std::size_t>(row) * static_cast<std::size_t>(shape_[1]) +
                 static_cast<std::size_t>(col)];
}

int Tensor::rows() const {
  if (shape_.size() != 2) throw DimensionError("rows(): tensor is not 2-d, shape " + shape_str());
  return shape_[0];
}

int Tensor::cols() const {
  if (shape_.size() != 2) throw DimensionError("cols(): tensor is not 2-d, shape " + shape_str());
  return shape_[1];
}

double Tensor::item() const {
  if (values_.size() != 1) throw DimensionError("item(): tensor has " + std::to_string(values_.size()) + " elements");
  return values_[0];
}

bool Tensor::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(double value) {
  for (double& v : values_) v = value;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << 'x';
    os << shape_[i];
  }
  os << ']';
  return os.str();
}

}  // namespace backtrack

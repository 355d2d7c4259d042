#include "dnncov/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "dnncov/error.hpp"

namespace dnncov {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw Error(ErrorCode::kShapeMismatch, "tensor shape must have rank >= 1");
  for (std::size_t d : shape) {
    if (d == 0) {
      throw Error(ErrorCode::kShapeMismatch, "tensor dimensions must be positive, got " + shape_to_string(shape));
    }
  }
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(element_count(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (element_count(shape_) != data_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "shape " + shape_to_string(shape_) + " needs " +
                                               std::to_string(element_count(shape_)) + " values, got " +
                                               std::to_string(data_.size()));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw Error(ErrorCode::kNumeric, "non-finite tensor value at flat index " + std::to_string(i));
    }
  }
}

Tensor Tensor::filled(Shape shape, double value) {
  std::vector<double> data(element_count(shape), value);
  return Tensor(std::move(shape), std::move(data));
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

}  // namespace dnncov

#include "triage/nn/tensor.hpp"

#include <cmath>

#include "triage/error.hpp"

namespace triage::nn {

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (count(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + shape_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
  }
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

void require_finite(const Tensor& t, std::string_view where) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw DataError("non-finite value at " + std::string(where));
  }
}

}  // namespace triage::nn

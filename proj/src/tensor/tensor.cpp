#include "crossgen/tensor/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "crossgen/util/errors.hpp"

namespace crossgen::tensor {

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) {
    if (d == 0) throw DimensionError("zero extent in shape " + to_string(shape));
    n *= d;
  }
  return n;
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill)
    : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (element_count(shape_) != values_.size())
    throw DimensionError("shape " + to_string(shape_) + " does not match " +
                         std::to_string(values_.size()) + " values");
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const {
  return BasicTensor(std::move(shape), values_);
}

template <typename T>
bool BasicTensor<T>::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
void BasicTensor<T>::fill(T value) {
  std::fill(values_.begin(), values_.end(), value);
}

template class BasicTensor<float>;
template class BasicTensor<double>;

}  // namespace crossgen::tensor

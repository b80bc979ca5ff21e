#include "factum/tensor.hpp"

#include <algorithm>
#include <cstring>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace factum {
namespace {

std::size_t element_count(const Tensor::Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t acc, std::uint32_t d) { return acc * d; });
}

}  // namespace

Tensor::Tensor(Shape shape, float fill)
    : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != element_count(shape_)) {
    throw std::invalid_argument("tensor: " + std::to_string(values_.size()) +
                                " values do not fill shape " + shape_string(shape_));
  }
}

std::span<float> Tensor::row(std::size_t i) {
  const std::size_t stride = values_.size() / shape_.at(0);
  return std::span<float>(values_).subspan(i * stride, stride);
}

std::span<const float> Tensor::row(std::size_t i) const {
  const std::size_t stride = values_.size() / shape_.at(0);
  return std::span<const float>(values_).subspan(i * stride, stride);
}

std::span<const float> Tensor::row(std::size_t i, std::size_t j) const {
  const std::size_t stride = shape_.at(2);
  return std::span<const float>(values_).subspan((i * shape_[1] + j) * stride, stride);
}

std::span<float> Tensor::row(std::size_t i, std::size_t j) {
  const std::size_t stride = shape_.at(2);
  return std::span<float>(values_).subspan((i * shape_[1] + j) * stride, stride);
}

bool Tensor::has_shape(std::initializer_list<std::size_t> expected) const {
  return std::equal(shape_.begin(), shape_.end(), expected.begin(), expected.end(),
                    [](std::uint32_t a, std::size_t b) { return a == b; });
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  return a.size() == 0 ||
         std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(float)) == 0;
}

std::string shape_string(const Tensor::Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += " x ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

}  // namespace factum

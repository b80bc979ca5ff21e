#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace factum {

// Dense row-major float32 tensor. This is the storage type for every captured
// activation; shapes are carried at runtime because they come from files.
class Tensor {
 public:
  using Shape = std::vector<std::uint32_t>;

  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::span<float> values() noexcept { return values_; }
  std::span<const float> values() const noexcept { return values_; }

  float& operator()(std::size_t i, std::size_t j) { return values_[i * shape_[1] + j]; }
  float operator()(std::size_t i, std::size_t j) const { return values_[i * shape_[1] + j]; }
  float& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
  }
  float operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
  }

  // Contiguous slice along the leading axes: row(i) of a matrix, row(i, j) of
  // a rank-3 tensor.
  std::span<float> row(std::size_t i);
  std::span<const float> row(std::size_t i) const;
  std::span<const float> row(std::size_t i, std::size_t j) const;
  std::span<float> row(std::size_t i, std::size_t j);

  bool has_shape(std::initializer_list<std::size_t> expected) const;

 private:
  Shape shape_;
  std::vector<float> values_;
};

// Equality of shape and of every float bit pattern (so -0.0 != 0.0).
bool bit_equal(const Tensor& a, const Tensor& b);

std::string shape_string(const Tensor::Shape& shape);

}  // namespace factum

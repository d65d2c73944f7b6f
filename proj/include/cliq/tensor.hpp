#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cliq {

// Dense row-major float32 array, rank 0..4. The universal numeric carrier:
// image batches, filters, activations, parameter vectors.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);  // zero-filled
  Tensor(std::vector<int> shape, std::vector<float> data);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, float value);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return data_.size(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::span<float> flat() { return {data_.data(), data_.size()}; }
  std::span<const float> flat() const { return {data_.data(), data_.size()}; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  float& at(int a) { return data_[offset({a})]; }
  float& at(int a, int b) { return data_[offset({a, b})]; }
  float& at(int a, int b, int c) { return data_[offset({a, b, c})]; }
  float& at(int a, int b, int c, int d) { return data_[offset({a, b, c, d})]; }
  float at(int a) const { return data_[offset({a})]; }
  float at(int a, int b) const { return data_[offset({a, b})]; }
  float at(int a, int b, int c) const { return data_[offset({a, b, c})]; }
  float at(int a, int b, int c, int d) const { return data_[offset({a, b, c, d})]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  // Bitwise comparison (distinguishes -0.0 from +0.0, unlike operator==).
  bool bit_equal(const Tensor& other) const;

  std::string shape_string() const;

  static std::size_t element_count(const std::vector<int>& shape);

 private:
  std::size_t offset(std::initializer_list<int> idx) const;

  std::vector<int> shape_;
  std::vector<float> data_;
};

}  // namespace cliq

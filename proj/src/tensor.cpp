#include "cliq/tensor.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace cliq {

std::size_t Tensor::element_count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (const int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(element_count(shape_), 0.0f) {
  if (shape_.size() > 4) throw std::invalid_argument("tensor rank > 4");
}

Tensor::Tensor(std::vector<int> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.size() > 4) throw std::invalid_argument("tensor rank > 4");
  if (data_.size() != element_count(shape_)) {
    throw std::invalid_argument("tensor data length does not match shape");
  }
}

Tensor Tensor::full(std::vector<int> shape, float value) {
  Tensor t(std::move(shape));
  for (float& v : t.data_) v = value;
  return t;
}

bool Tensor::all_finite() const {
  for (const float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool Tensor::bit_equal(const Tensor& other) const {
  return shape_ == other.shape_ &&
         std::memcmp(data_.data(), other.data_.data(),
                     data_.size() * sizeof(float)) == 0;
}

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

std::size_t Tensor::offset(std::initializer_list<int> idx) const {
  if (idx.size() != shape_.size()) {
    throw std::invalid_argument("tensor index rank mismatch for " + shape_string());
  }
  std::size_t off = 0;
  std::size_t k = 0;
  for (const int i : idx) {
    off = off * static_cast<std::size_t>(shape_[k]) + static_cast<std::size_t>(i);
    ++k;
  }
  return off;
}

}  // namespace cliq

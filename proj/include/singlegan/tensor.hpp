#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "singlegan/errors.hpp"

namespace singlegan {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

// Dense row-major array. A rank-0 tensor (empty shape) holds one scalar.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_)) {
      throw ShapeError("tensor data of size " + std::to_string(data_.size()) +
                       " does not match shape " + shape_string(shape_));
    }
  }

  static Tensor scalar(T v) { return Tensor(Shape{}, v); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // 4-axis [N,C,H,W] access.
  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  T item() const {
    if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape_));
    return data_[0];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor reshaped(Shape shape) const {
    if (shape_numel(shape) != numel()) {
      throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    return Tensor(std::move(shape), data_);
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

// Slice sample `index` out of a batch-major tensor, keeping the batch axis (size 1).
template <typename T>
Tensor<T> batch_slice(const Tensor<T>& batch, std::size_t index) {
  Shape shape = batch.shape();
  const std::size_t per = batch.numel() / shape.at(0);
  shape[0] = 1;
  std::vector<T> data(batch.data() + index * per, batch.data() + (index + 1) * per);
  return Tensor<T>(std::move(shape), std::move(data));
}

// Sample `index` of a batch-major tensor without the batch axis.
template <typename T>
Tensor<T> sample_of(const Tensor<T>& batch, std::size_t index) {
  Shape shape(batch.shape().begin() + 1, batch.shape().end());
  return batch_slice(batch, index).reshaped(std::move(shape));
}

// Stack equally-shaped samples along a new leading axis.
template <typename T>
Tensor<T> stack(std::span<const Tensor<T>> samples) {
  if (samples.empty()) throw ArgumentError("stack of zero tensors");
  Shape shape = samples.front().shape();
  shape.insert(shape.begin(), samples.size());
  std::vector<T> data;
  data.reserve(shape_numel(shape));
  for (const auto& s : samples) {
    if (s.shape() != samples.front().shape()) {
      throw ShapeError("stack: mismatched shapes " + shape_string(s.shape()) + " vs " +
                       shape_string(samples.front().shape()));
    }
    data.insert(data.end(), s.storage().begin(), s.storage().end());
  }
  return Tensor<T>(std::move(shape), std::move(data));
}

}  // namespace singlegan

#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cmib/util/error.hpp"

namespace cmib::ad {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
  std::string str() const { return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]"; }
};

/// Dense row-major matrix. Vectors are 1 x n.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, T fill = T(0))
      : shape_{rows, cols}, data_(rows * cols, fill) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<T> data)
      : shape_{rows, cols}, data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw ShapeError("tensor data has " + std::to_string(data_.size()) + " values for shape " +
                       shape_.str());
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t rows() const { return shape_.rows; }
  std::size_t cols() const { return shape_.cols; }
  std::size_t size() const { return data_.size(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * shape_.cols + c]; }
  T operator()(std::size_t r, std::size_t c) const { return data_[r * shape_.cols + c]; }
  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * shape_.cols, shape_.cols}; }
  std::span<const T> row(std::size_t r) const {
    return {data_.data() + r * shape_.cols, shape_.cols};
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

// Trainable tensor with its accumulated gradient.
template <class T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() { grad.fill(T(0)); }
};

}  // namespace cmib::ad

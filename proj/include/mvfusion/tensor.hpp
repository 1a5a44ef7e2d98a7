/*
 * Copyright 2026 The mvfusion Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mvfusion/errors.hpp"

namespace mvfusion {

inline constexpr std::size_t kMaxRank = 3;

// Dimensions of a tensor of rank 0..3. Rank 0 is a scalar with one element.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims) {
    if (dims.size() > kMaxRank) throw ShapeError("rank exceeds 3");
    for (std::size_t d : dims) dims_[rank_++] = d;
  }

  std::size_t rank() const { return rank_; }
  std::size_t operator[](std::size_t axis) const { return dims_[axis]; }

  std::size_t size() const {
    std::size_t n = 1;
    for (std::size_t i = 0; i < rank_; ++i) n *= dims_[i];
    return n;
  }

  // Product of dimensions in [begin, end).
  std::size_t span_size(std::size_t begin, std::size_t end) const {
    std::size_t n = 1;
    for (std::size_t i = begin; i < end; ++i) n *= dims_[i];
    return n;
  }

  Shape with(std::size_t axis, std::size_t value) const {
    Shape s = *this;
    s.dims_[axis] = value;
    return s;
  }

  Shape without(std::size_t axis) const {
    Shape s;
    for (std::size_t i = 0; i < rank_; ++i)
      if (i != axis) s.dims_[s.rank_++] = dims_[i];
    return s;
  }

  // True when `tail` equals the trailing dimensions of this shape.
  bool has_suffix(const Shape& tail) const {
    if (tail.rank_ > rank_) return false;
    const std::size_t off = rank_ - tail.rank_;
    for (std::size_t i = 0; i < tail.rank_; ++i)
      if (dims_[off + i] != tail.dims_[i]) return false;
    return true;
  }

  bool operator==(const Shape& o) const {
    if (rank_ != o.rank_) return false;
    for (std::size_t i = 0; i < rank_; ++i)
      if (dims_[i] != o.dims_[i]) return false;
    return true;
  }

  std::string str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < rank_; ++i) {
      if (i) s += ",";
      s += std::to_string(dims_[i]);
    }
    return s + "]";
  }

  std::vector<std::size_t> dims() const {
    return {dims_.begin(), dims_.begin() + static_cast<std::ptrdiff_t>(rank_)};
  }

  static Shape from(std::span<const std::size_t> dims) {
    if (dims.size() > kMaxRank) throw ShapeError("rank exceeds 3");
    Shape s;
    for (std::size_t d : dims) s.dims_[s.rank_++] = d;
    return s;
  }

 private:
  std::array<std::size_t, kMaxRank> dims_{};
  std::size_t rank_ = 0;
};

// Dense row-major tensor owning its storage.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : data_(1, T{}) {}
  explicit Tensor(Shape shape, T fill = T{})
      : shape_(shape), data_(shape.size(), fill) {}
  Tensor(Shape shape, std::vector<T> data)
      : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size())
      throw ShapeError("data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.str());
  }

  static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rank() const { return shape_.rank(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const T& at(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
  }
  T& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const T& at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  T item() const {
    if (data_.size() != 1) throw ShapeError("item() on non-scalar tensor");
    return data_[0];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor reshaped(Shape s) const {
    if (s.size() != shape_.size())
      throw ShapeError("cannot reshape " + shape_.str() + " to " + s.str());
    return Tensor(s, data_);
  }

  template <class U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  bool operator==(const Tensor& o) const {
    return shape_ == o.shape_ && data_ == o.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

}  // namespace mvfusion

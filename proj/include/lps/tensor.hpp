// Copyright 2026 The lpskit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LPS_TENSOR_HPP_
#define LPS_TENSOR_HPP_

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lps/error.hpp"

namespace lps {

// Up to four extents. Feature maps are (channels, height, width); convolution
// weights are (out, in, kh, kw).
using Shape = std::vector<int>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

// Dense row-major array. The scalar type is a template parameter so that the
// same kernels serve 32-bit production code and 64-bit gradient checks.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0))
      : shape_(validated(std::move(shape))), data_(shape_numel(shape_), fill) {}
  BasicTensor(Shape shape, std::vector<T> data)
      : shape_(validated(std::move(shape))), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_)) {
      throw Error(ErrorKind::kShape,
                  "tensor data length " + std::to_string(data_.size()) +
                      " does not match shape " + shape_str(shape_),
                  {{"shape", shape_str(shape_)}});
    }
  }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() & { return data_; }
  const std::vector<T>& storage() const& { return data_; }
  // By value on temporaries so range-for over f().storage() stays valid.
  std::vector<T> storage() && { return std::move(data_); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // (c, h, w) accessors for rank-3 feature maps.
  int channels() const { return shape_[0]; }
  int height() const { return shape_[1]; }
  int width() const { return shape_[2]; }
  T& at(int c, int h, int w) {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + h) * shape_[2] + w];
  }
  const T& at(int c, int h, int w) const {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + h) * shape_[2] + w];
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static Shape validated(Shape shape) {
    if (shape.size() > 4) {
      throw Error(ErrorKind::kShape, "tensor rank above 4: " + shape_str(shape),
                  {{"shape", shape_str(shape)}});
    }
    for (int e : shape) {
      if (e < 0) {
        throw Error(ErrorKind::kShape, "negative extent in " + shape_str(shape),
                    {{"shape", shape_str(shape)}});
      }
    }
    return shape;
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

// Throws a kShape error naming both shapes unless they are equal.
void require_same_shape(const Shape& a, const Shape& b, const char* what);

}  // namespace lps

#endif  // LPS_TENSOR_HPP_

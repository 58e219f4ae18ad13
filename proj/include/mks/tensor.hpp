/*
 * Copyright 2026 The mkslib Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MKS_TENSOR_HPP_
#define MKS_TENSOR_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "mks/error.hpp"

namespace mks {

// On-disk element type codes shared by the tensor dump and weight formats.
enum class DType : std::uint8_t { kFloat32 = 1, kFloat64 = 2 };

template <typename T>
constexpr DType dtype_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? DType::kFloat32 : DType::kFloat64;
}

std::size_t dtype_size(DType dtype);

// NCHW extents. Vectors (B, C) are carried as (B, C, 1, 1).
struct Shape {
  std::int64_t n = 0;
  std::int64_t c = 0;
  std::int64_t h = 0;
  std::int64_t w = 0;

  constexpr std::int64_t numel() const { return n * c * h * w; }
  constexpr std::int64_t plane() const { return h * w; }
  constexpr bool positive() const { return n > 0 && c > 0 && h > 0 && w > 0; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;
  std::string str() const;
};

// Dense row-major NCHW array owning its storage.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> data);

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape()); }
  static constexpr DType dtype() { return dtype_of<T>(); }

  const Shape& shape() const { return shape_; }
  std::int64_t numel() const { return shape_.numel(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  T* ptr() { return data_.data(); }
  const T* ptr() const { return data_.data(); }

  std::int64_t offset(std::int64_t n, std::int64_t c, std::int64_t h,
                      std::int64_t w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  T& operator()(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
    return data_[static_cast<std::size_t>(offset(n, c, h, w))];
  }
  T operator()(std::int64_t n, std::int64_t c, std::int64_t h,
               std::int64_t w) const {
    return data_[static_cast<std::size_t>(offset(n, c, h, w))];
  }
  T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  T operator[](std::int64_t i) const {
    return data_[static_cast<std::size_t>(i)];
  }

  // Contiguous H*W plane of sample n, channel c.
  T* plane(std::int64_t n, std::int64_t c) {
    return data_.data() + offset(n, c, 0, 0);
  }
  const T* plane(std::int64_t n, std::int64_t c) const {
    return data_.data() + offset(n, c, 0, 0);
  }

  void fill(T value);
  // Same data, new extents with equal element count.
  Tensor reshaped(Shape shape) const;

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

// Throws ShapeError unless every extent is >= 1.
void require_nonempty(const Shape& shape, const char* what);
// Throws ShapeError unless a == b.
void require_same_shape(const Shape& a, const Shape& b, const char* what);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace mks

#endif  // MKS_TENSOR_HPP_

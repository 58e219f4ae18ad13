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

#ifndef MKS_TENSOR_IO_HPP_
#define MKS_TENSOR_IO_HPP_

// Tensor dump format (little-endian):
//   "MKST" | u8 dtype (1 = f32, 2 = f64) | u32 N, C, H, W | raw scalars

#include <filesystem>
#include <iosfwd>
#include <variant>

#include "mks/tensor.hpp"

namespace mks {

using AnyTensor = std::variant<Tensor<float>, Tensor<double>>;

template <typename T>
void write_tensor(std::ostream& out, const Tensor<T>& t);
template <typename T>
void save_tensor(const std::filesystem::path& path, const Tensor<T>& t);

AnyTensor read_tensor(std::istream& in);
AnyTensor load_tensor(const std::filesystem::path& path);
// Throws FormatError if the stored dtype is not T.
template <typename T>
Tensor<T> load_tensor_as(const std::filesystem::path& path);

}  // namespace mks

#endif  // MKS_TENSOR_IO_HPP_

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

#include "mks/tensor_io.hpp"

#include <fstream>

#include "binary_io.hpp"

namespace mks {

template <typename T>
void write_tensor(std::ostream& out, const Tensor<T>& t) {
  out.write("MKST", 4);
  detail::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(dtype_of<T>()));
  detail::write_dims(out, t.shape());
  detail::write_payload(out, t);
}

template <typename T>
void save_tensor(const std::filesystem::path& path, const Tensor<T>& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_tensor(out, t);
  if (!out) throw FormatError("write failed for " + path.string());
}

AnyTensor read_tensor(std::istream& in) {
  detail::expect_magic(in, "MKST");
  const DType dtype = detail::read_dtype(in);
  const Shape shape = detail::read_dims(in);
  if (dtype == DType::kFloat32) return detail::read_payload<float>(in, shape);
  return detail::read_payload<double>(in, shape);
}

AnyTensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_tensor(in);
}

template <typename T>
Tensor<T> load_tensor_as(const std::filesystem::path& path) {
  AnyTensor any = load_tensor(path);
  if (auto* t = std::get_if<Tensor<T>>(&any)) return std::move(*t);
  throw FormatError(path.string() + ": stored dtype does not match request");
}

template void write_tensor(std::ostream&, const Tensor<float>&);
template void write_tensor(std::ostream&, const Tensor<double>&);
template void save_tensor(const std::filesystem::path&, const Tensor<float>&);
template void save_tensor(const std::filesystem::path&, const Tensor<double>&);
template Tensor<float> load_tensor_as(const std::filesystem::path&);
template Tensor<double> load_tensor_as(const std::filesystem::path&);

}  // namespace mks

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

#ifndef MKS_SRC_BINARY_IO_HPP_
#define MKS_SRC_BINARY_IO_HPP_

// Little-endian primitive readers/writers shared by the tensor dump and the
// weight file.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "mks/error.hpp"
#include "mks/tensor.hpp"

namespace mks::detail {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

template <typename U>
void write_le(std::ostream& out, U value) {
  static_assert(std::is_trivially_copyable_v<U>);
  out.write(reinterpret_cast<const char*>(&value), sizeof(U));
}

template <typename U>
U read_le(std::istream& in, const char* what) {
  U value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(U));
  if (!in) throw FormatError(std::string("truncated file while reading ") + what);
  return value;
}

inline void expect_magic(std::istream& in, const char (&magic)[5]) {
  char buf[4] = {};
  in.read(buf, 4);
  if (!in || std::memcmp(buf, magic, 4) != 0) {
    throw FormatError(std::string("bad magic, expected '") + magic + "'");
  }
}

inline void write_dims(std::ostream& out, const Shape& s) {
  for (std::int64_t d : {s.n, s.c, s.h, s.w}) {
    if (d < 0 || d > 0xFFFFFFFFLL) throw FormatError("dimension out of u32 range");
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  }
}

inline Shape read_dims(std::istream& in) {
  Shape s;
  s.n = read_le<std::uint32_t>(in, "dims");
  s.c = read_le<std::uint32_t>(in, "dims");
  s.h = read_le<std::uint32_t>(in, "dims");
  s.w = read_le<std::uint32_t>(in, "dims");
  return s;
}

inline DType read_dtype(std::istream& in) {
  const auto code = read_le<std::uint8_t>(in, "dtype");
  if (code != static_cast<std::uint8_t>(DType::kFloat32) &&
      code != static_cast<std::uint8_t>(DType::kFloat64)) {
    throw FormatError("unknown dtype code " + std::to_string(code));
  }
  return static_cast<DType>(code);
}

template <typename T>
void write_payload(std::ostream& out, const Tensor<T>& t) {
  out.write(reinterpret_cast<const char*>(t.ptr()),
            static_cast<std::streamsize>(t.numel() * sizeof(T)));
}

template <typename T>
Tensor<T> read_payload(std::istream& in, const Shape& shape) {
  Tensor<T> t(shape);
  in.read(reinterpret_cast<char*>(t.ptr()),
          static_cast<std::streamsize>(t.numel() * sizeof(T)));
  if (!in) throw FormatError("truncated tensor payload");
  return t;
}

}  // namespace mks::detail

#endif  // MKS_SRC_BINARY_IO_HPP_

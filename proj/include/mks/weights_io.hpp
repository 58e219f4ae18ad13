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

#ifndef MKS_WEIGHTS_IO_HPP_
#define MKS_WEIGHTS_IO_HPP_

// Weight file format (little-endian):
//   "MKSW" | u32 version (= 1) | u32 entry count
//   per entry: u16 name length | name bytes | u8 dtype | u32 N, C, H, W | raw
//
// Entries are the model's parameters followed by its batch-norm running
// statistics ("<layer>.running_mean" / "<layer>.running_var").

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "mks/backbone.hpp"

namespace mks {

inline constexpr std::uint32_t kWeightFormatVersion = 1;

template <typename T>
void write_weights(std::ostream& out, Model<T>& model);
template <typename T>
void save_weights(const std::filesystem::path& path, Model<T>& model);

// The file must hold exactly the model's parameter and statistic names with
// matching shapes and dtype; anything missing or extra is a FormatError.
template <typename T>
void read_weights(std::istream& in, Model<T>& model);
template <typename T>
void load_weights(const std::filesystem::path& path, Model<T>& model);

}  // namespace mks

#endif  // MKS_WEIGHTS_IO_HPP_

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

#include "mks/weights_io.hpp"

#include <fstream>
#include <limits>
#include <map>
#include <vector>

#include "binary_io.hpp"

namespace mks {
namespace {

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> entries_of(Model<T>& model) {
  std::vector<std::pair<std::string, Tensor<T>*>> entries;
  model.visit([&](Param<T>& p) { entries.emplace_back(p.name, &p.value); });
  model.visit_buffers(
      [&](const std::string& name, Tensor<T>& t) { entries.emplace_back(name, &t); });
  return entries;
}

}  // namespace

template <typename T>
void write_weights(std::ostream& out, Model<T>& model) {
  const auto entries = entries_of(model);
  out.write("MKSW", 4);
  detail::write_le<std::uint32_t>(out, kWeightFormatVersion);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, tensor] : entries) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw FormatError("parameter name too long: " + name);
    }
    detail::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(dtype_of<T>()));
    detail::write_dims(out, tensor->shape());
    detail::write_payload(out, *tensor);
  }
}

template <typename T>
void save_weights(const std::filesystem::path& path, Model<T>& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_weights(out, model);
  if (!out) throw FormatError("write failed for " + path.string());
}

template <typename T>
void read_weights(std::istream& in, Model<T>& model) {
  detail::expect_magic(in, "MKSW");
  const auto version = detail::read_le<std::uint32_t>(in, "version");
  if (version != kWeightFormatVersion) {
    throw FormatError("unsupported weight file version " + std::to_string(version));
  }
  const auto count = detail::read_le<std::uint32_t>(in, "entry count");

  std::map<std::string, Tensor<T>*> targets;
  for (const auto& [name, tensor] : entries_of(model)) targets.emplace(name, tensor);

  // Decode everything before touching the model so a bad file leaves it intact.
  std::map<std::string, Tensor<T>> loaded;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = detail::read_le<std::uint16_t>(in, "name length");
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (!in) throw FormatError("truncated entry name");
    const DType dtype = detail::read_dtype(in);
    const Shape shape = detail::read_dims(in);
    auto it = targets.find(name);
    if (it == targets.end()) throw FormatError("unexpected entry '" + name + "'");
    if (dtype != dtype_of<T>()) {
      throw FormatError("entry '" + name + "' has mismatched dtype");
    }
    if (!(shape == it->second->shape())) {
      throw FormatError("entry '" + name + "' has shape " + shape.str() +
                        ", model expects " + it->second->shape().str());
    }
    if (!loaded.emplace(name, detail::read_payload<T>(in, shape)).second) {
      throw FormatError("duplicate entry '" + name + "'");
    }
  }
  for (const auto& [name, tensor] : targets) {
    if (!loaded.count(name)) throw FormatError("missing entry '" + name + "'");
  }
  for (auto& [name, tensor] : loaded) *targets.at(name) = std::move(tensor);
}

template <typename T>
void load_weights(const std::filesystem::path& path, Model<T>& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  read_weights(in, model);
}

template void write_weights(std::ostream&, Model<float>&);
template void write_weights(std::ostream&, Model<double>&);
template void save_weights(const std::filesystem::path&, Model<float>&);
template void save_weights(const std::filesystem::path&, Model<double>&);
template void read_weights(std::istream&, Model<float>&);
template void read_weights(std::istream&, Model<double>&);
template void load_weights(const std::filesystem::path&, Model<float>&);
template void load_weights(const std::filesystem::path&, Model<double>&);

}  // namespace mks

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

#include "mks/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "mks/error.hpp"

namespace mks {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::int64_t to_int(const std::string& field, const std::string& v) {
  std::int64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(field, "expected an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& field, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(field, "expected an unsigned integer, got '" + v + "'");
  }
  return out;
}

double to_double(const std::string& field, const std::string& v) {
  std::istringstream in(v);
  in.imbue(std::locale::classic());
  double out = 0;
  in >> out;
  if (in.fail() || !in.eof()) {
    throw ConfigError(field, "expected a number, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& field, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(field, "expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& field, const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  if (out.empty() || (out.size() == 1 && out[0].empty())) {
    throw ConfigError(field, "empty list");
  }
  return out;
}

void resize_stages(BackboneConfig& m, std::size_t n) {
  const StageConfig proto = m.stages.empty() ? StageConfig{} : m.stages.back();
  while (m.stages.size() < n) {
    StageConfig s = proto;
    s.downsample = !m.stages.empty();
    m.stages.push_back(s);
  }
  m.stages.resize(n);
}

std::string join(const std::vector<std::int64_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void set_config_value(RunConfig& c, const std::string& section,
                      const std::string& key, const std::string& value) {
  const std::string field = section + "." + key;
  BackboneConfig& m = c.model;
  TrainConfig& t = c.train;
  if (section == "model") {
    if (key == "in_channels") { m.in_channels = to_int(field, value); return; }
    if (key == "patch_kernel") { m.patch.kernel = to_int(field, value); return; }
    if (key == "patch_stride") { m.patch.stride = to_int(field, value); return; }
    if (key == "patch_channels") { m.patch.channels = to_int(field, value); return; }
    if (key == "depths" || key == "channels") {
      const auto items = split_list(field, value);
      if (key == "depths") resize_stages(m, items.size());
      if (items.size() != m.stages.size()) {
        throw ConfigError(field, "has " + std::to_string(items.size()) +
                                     " entries but depths has " +
                                     std::to_string(m.stages.size()));
      }
      for (std::size_t i = 0; i < items.size(); ++i) {
        const std::int64_t v = to_int(field, items[i]);
        (key == "depths" ? m.stages[i].depth : m.stages[i].channels) = v;
      }
      return;
    }
    if (key == "S" || key == "max_size" || key == "r") {
      const std::int64_t v = to_int(field, value);
      for (StageConfig& s : m.stages) {
        (key == "S" ? s.branches : key == "r" ? s.reduction : s.max_size) = v;
      }
      return;
    }
    if (key == "attention_kernel") { m.attention_kernel = to_int(field, value); return; }
    if (key == "activation") {
      try {
        m.activation = parse_activation(value);
      } catch (const Error& e) {
        throw ConfigError(field, e.what());
      }
      return;
    }
    if (key == "variant") {
      try {
        c.variant = parse_variant(value);
      } catch (const Error&) {
        throw ConfigError(field, "unknown variant '" + value + "'");
      }
      return;
    }
  } else if (section == "train") {
    if (key == "epochs") { t.epochs = to_int(field, value); return; }
    if (key == "batch") { t.batch = to_int(field, value); return; }
    if (key == "train_samples") { t.train_samples = to_int(field, value); return; }
    if (key == "val_samples") { t.val_samples = to_int(field, value); return; }
    if (key == "image_size") { t.image_size = to_int(field, value); return; }
    if (key == "lr") { t.optimizer.lr = to_double(field, value); return; }
    if (key == "beta1") { t.optimizer.beta1 = to_double(field, value); return; }
    if (key == "beta2") { t.optimizer.beta2 = to_double(field, value); return; }
    if (key == "betas") {
      const auto items = split_list(field, value);
      if (items.size() != 2) throw ConfigError(field, "expected two values");
      t.optimizer.beta1 = to_double(field, items[0]);
      t.optimizer.beta2 = to_double(field, items[1]);
      return;
    }
    if (key == "weight_decay") { t.optimizer.weight_decay = to_double(field, value); return; }
    if (key == "eps") { t.optimizer.eps = to_double(field, value); return; }
    if (key == "cosine") { t.cosine = to_bool(field, value); return; }
    if (key == "seed") { c.seed = to_u64(field, value); return; }
    if (key == "seeds") {
      c.ablation_seeds.clear();
      for (const auto& s : split_list(field, value)) c.ablation_seeds.push_back(to_u64(field, s));
      return;
    }
  } else if (section == "io") {
    if (key == "out_dir") { c.out_dir = value; return; }
    if (key == "weights") { c.weights = value; return; }
  } else {
    throw ConfigError(section, "unknown section");
  }
  throw ConfigError(field, "unknown key");
}

void RunConfig::validate() const {
  BackboneConfig m = with_variant(model, variant);
  m.validate();
  for (Variant v : kAblationVariants) with_variant(model, v).validate();
  train.validate();
  const std::int64_t stride = m.total_stride();
  if (train.image_size % stride != 0 || train.image_size < m.patch.kernel) {
    throw ConfigError("train.image_size",
                      "must be a multiple of the backbone stride " +
                          std::to_string(stride));
  }
  if (ablation_seeds.empty()) throw ConfigError("train.seeds", "at least one seed required");
  if (out_dir.empty()) throw ConfigError("io.out_dir", "must not be empty");
  if (weights.empty()) throw ConfigError("io.weights", "must not be empty");
}

RunConfig parse_config(std::istream& in) {
  RunConfig c;
  std::string section;
  std::set<std::string> seen;
  std::string raw;
  std::int64_t line_no = 0;
  struct Entry {
    std::string section, key, value;
  };
  std::vector<Entry> entries;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const std::string where = "line " + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "model" && section != "train" && section != "io") {
        throw ConfigError(section, "unknown section");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where, "expected key = value");
    if (section.empty()) throw ConfigError(where, "entry outside of a section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(section + "." + key).second) {
      throw ConfigError(section + "." + key, "duplicate key");
    }
    entries.push_back({section, key, value});
  }
  if (in.bad()) throw FormatError("error reading config");
  // depths sizes the stage list, so it applies before the per-stage keys.
  std::stable_partition(entries.begin(), entries.end(), [](const Entry& e) {
    return e.section == "model" && e.key == "depths";
  });
  for (const Entry& e : entries) set_config_value(c, e.section, e.key, e.value);
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open " + path);
  return parse_config(in);
}

void write_config(std::ostream& out, const RunConfig& c) {
  const BackboneConfig& m = c.model;
  std::vector<std::int64_t> depths, channels;
  for (const StageConfig& s : m.stages) {
    depths.push_back(s.depth);
    channels.push_back(s.channels);
  }
  const StageConfig s0 = m.stages.empty() ? StageConfig{} : m.stages.front();
  out << "[model]\n"
      << "in_channels = " << m.in_channels << '\n'
      << "patch_kernel = " << m.patch.kernel << '\n'
      << "patch_stride = " << m.patch.stride << '\n'
      << "patch_channels = " << m.patch.channels << '\n'
      << "depths = " << join(depths) << '\n'
      << "channels = " << join(channels) << '\n'
      << "S = " << s0.branches << '\n'
      << "max_size = " << s0.max_size << '\n'
      << "r = " << s0.reduction << '\n'
      << "attention_kernel = " << m.attention_kernel << '\n'
      << "activation = " << activation_name(m.activation) << '\n'
      << "variant = " << variant_name(c.variant) << "\n\n";
  const TrainConfig& t = c.train;
  out << "[train]\n"
      << "epochs = " << t.epochs << '\n'
      << "batch = " << t.batch << '\n'
      << "train_samples = " << t.train_samples << '\n'
      << "val_samples = " << t.val_samples << '\n'
      << "image_size = " << t.image_size << '\n'
      << "lr = " << num(t.optimizer.lr) << '\n'
      << "betas = " << num(t.optimizer.beta1) << ", " << num(t.optimizer.beta2) << '\n'
      << "weight_decay = " << num(t.optimizer.weight_decay) << '\n'
      << "eps = " << num(t.optimizer.eps) << '\n'
      << "cosine = " << (t.cosine ? "true" : "false") << '\n'
      << "seed = " << c.seed << '\n'
      << "seeds = ";
  for (std::size_t i = 0; i < c.ablation_seeds.size(); ++i) {
    out << (i ? "," : "") << c.ablation_seeds[i];
  }
  out << "\n\n[io]\n"
      << "out_dir = " << c.out_dir << '\n'
      << "weights = " << c.weights << '\n';
}

}  // namespace mks

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

#ifndef MKS_CONFIG_HPP_
#define MKS_CONFIG_HPP_

// Run configuration file. Grammar:
//
//   file    := line*
//   line    := blank | comment | section | entry
//   comment := ('#' | ';') any*
//   section := '[' ('model' | 'train' | 'io') ']'
//   entry   := key '=' value          (surrounding whitespace is trimmed)
//
// Lists are comma separated. Unknown sections or keys, duplicate keys, and
// entries before the first section are errors.

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "mks/backbone.hpp"
#include "mks/train.hpp"

namespace mks {

struct RunConfig {
  BackboneConfig model = BackboneConfig::tiny();
  Variant variant = Variant::kMks;
  TrainConfig train;
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> ablation_seeds = {1, 2, 3};
  std::string out_dir = "out";
  std::string weights = "model.mksw";

  // Throws ConfigError naming the first invalid field.
  void validate() const;
};

// Applies one `section.key = value` assignment. Throws ConfigError.
void set_config_value(RunConfig& config, const std::string& section,
                      const std::string& key, const std::string& value);

// Starts from the defaults; the result is validated.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);

void write_config(std::ostream& out, const RunConfig& config);

}  // namespace mks

#endif  // MKS_CONFIG_HPP_

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

#ifndef MKS_FLOPS_HPP_
#define MKS_FLOPS_HPP_

// Closed-form cost accounting. FLOPs are 2 x multiply-accumulates of
// convolutions and fully connected layers, per sample; normalization,
// activations and elementwise products are not counted.

#include <cstdint>
#include <string>
#include <vector>

#include "mks/backbone.hpp"

namespace mks {

struct LayerCost {
  std::string name;
  std::int64_t params = 0;
  std::int64_t flops = 0;
  Shape output;  // per sample (n = 1)
};

std::int64_t conv_flops(const ConvSpec& spec, std::int64_t in_h, std::int64_t in_w);
std::int64_t conv_params(const ConvSpec& spec, bool with_bias);
std::int64_t linear_flops(std::int64_t in_features, std::int64_t out_features);

// Every parameterized layer of Model(config) in forward order, for a
// single (in_channels, height, width) input.
std::vector<LayerCost> layer_costs(const BackboneConfig& config,
                                   std::int64_t height, std::int64_t width);

std::int64_t count_flops(const BackboneConfig& config, std::int64_t height,
                         std::int64_t width);
std::int64_t count_params(const BackboneConfig& config);

}  // namespace mks

#endif  // MKS_FLOPS_HPP_

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

#include "mks/flops.hpp"

#include <algorithm>

namespace mks {
namespace {

class CostWalker {
 public:
  explicit CostWalker(std::vector<LayerCost>& out) : out_(out) {}

  Shape conv(const std::string& name, const ConvSpec& spec, bool bias,
             const Shape& in) {
    const Shape o = spec.output_shape(in);
    out_.push_back({name, conv_params(spec, bias), conv_flops(spec, in.h, in.w), o});
    return o;
  }
  void norm(const std::string& name, const Shape& in) {
    out_.push_back({name, 2 * in.c, 0, in});
  }
  void linear(const std::string& name, std::int64_t in, std::int64_t out) {
    out_.push_back({name, in * out + out, linear_flops(in, out), {1, out, 1, 1}});
  }
  void scale(const std::string& name, const Shape& in) {
    out_.push_back({name, in.c, 0, in});
  }

 private:
  std::vector<LayerCost>& out_;
};

void block_costs(CostWalker& w, const std::string& name, const BlockConfig& b,
                 const Shape& in) {
  const std::int64_t c = b.channels;
  if (b.layout.local) {
    w.norm(name + ".local.norm", in);
    w.conv(name + ".local.depthwise", ConvSpec::depthwise(c, 3, 1, 1), true, in);
    w.conv(name + ".local.pointwise", ConvSpec::pointwise(c, c), true, in);
    w.scale(name + ".local_scale", in);
  }
  if (b.layout.channel_attention) {
    w.norm(name + ".ca_norm", in);
    const std::int64_t hidden = c / b.reduction;
    for (const char* path : {"avg", "max"}) {
      w.linear(name + ".ca." + path + "_reduce", c, hidden);
      w.linear(name + ".ca." + path + "_expand", hidden, c);
    }
    w.linear(name + ".ca.mix", c, c);
    w.scale(name + ".ca_scale", in);
  }
  if (b.layout.spatial_attention) {
    w.norm(name + ".sa_norm", in);
    const KernelSchedule sched = build_schedule(b.branches, b.max_size);
    const std::int64_t part = c / b.branches;
    for (std::size_t i = 0; i < sched.entries.size(); ++i) {
      const KernelEntry& e = sched.entries[i];
      const std::string br = name + ".sa.branch" + std::to_string(i);
      w.conv(br + ".spatial", ConvSpec::depthwise(c, e.kernel, e.dilation, e.padding),
             false, in);
      w.norm(br + ".norm", in);
      w.conv(br + ".pointwise", ConvSpec::pointwise(c, c), true, in);
      w.conv(br + ".transform", ConvSpec::pointwise(c, part), true, in);
    }
    const std::int64_t ak = b.attention_kernel;
    w.conv(name + ".sa.attention",
           ConvSpec::square(2, b.branches, ak, 1, 1, (ak - 1) / 2), true,
           {1, 2, in.h, in.w});
    w.conv(name + ".sa.output", ConvSpec::pointwise(part, c), true,
           {1, part, in.h, in.w});
    w.scale(name + ".sa_scale", in);
  }
}

}  // namespace

std::int64_t conv_flops(const ConvSpec& spec, std::int64_t in_h,
                        std::int64_t in_w) {
  const std::int64_t oh = spec.output_extent(in_h, spec.kernel_h);
  const std::int64_t ow = spec.output_extent(in_w, spec.kernel_w);
  return 2 * spec.fan_in() * spec.out_channels * oh * ow;
}

std::int64_t conv_params(const ConvSpec& spec, bool with_bias) {
  return spec.weight_shape().numel() + (with_bias ? spec.out_channels : 0);
}

std::int64_t linear_flops(std::int64_t in_features, std::int64_t out_features) {
  return 2 * in_features * out_features;
}

std::vector<LayerCost> layer_costs(const BackboneConfig& config,
                                   std::int64_t height, std::int64_t width) {
  config.validate();
  config.check_input_size(height, width);
  std::vector<LayerCost> out;
  CostWalker w(out);
  const auto& p = config.patch;
  Shape h = w.conv("patch.conv",
                   ConvSpec::square(config.in_channels, p.channels, p.kernel, p.stride),
                   false, {1, config.in_channels, height, width});
  w.norm("patch.norm", h);
  for (std::size_t i = 0; i < config.stages.size(); ++i) {
    const StageConfig& s = config.stages[i];
    const std::string name = "stage" + std::to_string(i);
    if (s.downsample) {
      h = w.conv(name + ".down", ConvSpec::square(h.c, s.channels, 3, 2, 1, 1),
                 false, h);
      w.norm(name + ".down_norm", h);
    }
    const BlockConfig bc = config.block_config(i);
    for (std::int64_t j = 0; j < s.depth; ++j) {
      block_costs(w, name + ".block" + std::to_string(j), bc, h);
    }
  }
  w.conv("head.conv", ConvSpec::pointwise(h.c, 1), true, h);
  return out;
}

std::int64_t count_flops(const BackboneConfig& config, std::int64_t height,
                         std::int64_t width) {
  std::int64_t total = 0;
  for (const auto& l : layer_costs(config, height, width)) total += l.flops;
  return total;
}

std::int64_t count_params(const BackboneConfig& config) {
  const std::int64_t s = config.total_stride();
  std::int64_t total = 0;
  const std::int64_t side = s * std::max<std::int64_t>(
      1, (config.patch.kernel + s - 1) / s);
  for (const auto& l : layer_costs(config, side, side)) total += l.params;
  return total;
}

}  // namespace mks

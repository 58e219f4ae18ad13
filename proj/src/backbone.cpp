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

#include "mks/backbone.hpp"

#include <set>

namespace mks {

// --- BackboneConfig ---------------------------------------------------------

BackboneConfig BackboneConfig::tiny() {
  BackboneConfig c;
  c.in_channels = 3;
  c.patch = {4, 4, 32};
  c.stages = {{1, 32, 2, 7, 4, false},
              {2, 64, 2, 7, 4, true},
              {1, 128, 2, 7, 4, true}};
  return c;
}

void BackboneConfig::validate() const {
  auto require = [](bool ok, const std::string& field, const std::string& msg) {
    if (!ok) throw ConfigError(field, msg);
  };
  require(in_channels >= 1, "model.in_channels", "must be >= 1");
  require(patch.kernel >= 1, "model.patch_kernel", "must be >= 1");
  require(patch.stride >= 1, "model.patch_stride", "must be >= 1");
  require(patch.channels >= 1, "model.patch_channels", "must be >= 1");
  require(!stages.empty(), "model.depths", "at least one stage required");
  require(attention_kernel >= 1 && attention_kernel % 2 == 1,
          "model.attention_kernel", "must be odd and >= 1");
  std::int64_t prev = patch.channels;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const StageConfig& s = stages[i];
    const std::string idx = "[" + std::to_string(i) + "]";
    require(s.depth >= 0, "model.depths" + idx, "must be >= 0");
    require(s.channels >= 1, "model.channels" + idx, "must be >= 1");
    require(s.channels >= prev, "model.channels" + idx,
            "stage widths must be non-decreasing");
    require(i > 0 || s.downsample || s.channels == patch.channels,
            "model.channels[0]", "first stage must match patch_channels");
    require(s.branches >= 1, "model.S", "must be >= 1");
    require(s.max_size >= 5 && s.max_size % 2 == 1, "model.max_size",
            "must be odd and >= 5");
    require(s.reduction >= 1, "model.r", "must be >= 1");
    if (layout.spatial_attention) {
      require(s.channels % s.branches == 0, "model.S",
              "channels " + std::to_string(s.channels) +
                  " not divisible by S = " + std::to_string(s.branches));
    }
    if (layout.channel_attention) {
      require(s.channels % s.reduction == 0, "model.r",
              "channels " + std::to_string(s.channels) +
                  " not divisible by r = " + std::to_string(s.reduction));
    }
    prev = s.channels;
  }
}

std::int64_t BackboneConfig::total_stride() const {
  std::int64_t s = patch.stride;
  for (const auto& st : stages) {
    if (st.downsample) s *= 2;
  }
  return s;
}

void BackboneConfig::check_input_size(std::int64_t height,
                                      std::int64_t width) const {
  const std::int64_t s = total_stride();
  if (height < patch.kernel || width < patch.kernel || height % s != 0 ||
      width % s != 0 || (height / patch.stride) * patch.stride != height) {
    throw ShapeError("input " + std::to_string(height) + "x" +
                     std::to_string(width) + " not divisible by total stride " +
                     std::to_string(s));
  }
}

BlockConfig BackboneConfig::block_config(std::size_t stage) const {
  const StageConfig& s = stages.at(stage);
  BlockConfig b;
  b.channels = s.channels;
  b.branches = s.branches;
  b.max_size = s.max_size;
  b.reduction = s.reduction;
  b.attention_kernel = attention_kernel;
  b.activation = activation;
  b.layout = layout;
  return b;
}

// --- Backbone ---------------------------------------------------------------

template <typename T>
Backbone<T>::Backbone(const BackboneConfig& config) : config_(config) {
  config_.validate();
  const auto& p = config_.patch;
  patch_conv = Conv2d<T>(
      "patch.conv",
      ConvSpec::square(config_.in_channels, p.channels, p.kernel, p.stride), false);
  patch_norm = BatchNorm2d<T>("patch.norm", p.channels);
  std::int64_t prev = p.channels;
  for (std::size_t i = 0; i < config_.stages.size(); ++i) {
    const StageConfig& sc = config_.stages[i];
    const std::string name = "stage" + std::to_string(i);
    Stage stage;
    stage.downsample = sc.downsample;
    if (sc.downsample) {
      stage.down = Conv2d<T>(name + ".down",
                             ConvSpec::square(prev, sc.channels, 3, 2, 1, 1), false);
      stage.down_norm = BatchNorm2d<T>(name + ".down_norm", sc.channels);
    } else if (prev != sc.channels) {
      throw ConfigError("model.channels[" + std::to_string(i) + "]",
                        "width change requires downsampling");
    }
    const BlockConfig bc = config_.block_config(i);
    for (std::int64_t j = 0; j < sc.depth; ++j) {
      stage.blocks.emplace_back(name + ".block" + std::to_string(j), bc);
    }
    stages.push_back(std::move(stage));
    prev = sc.channels;
  }
}

template <typename T>
void Backbone<T>::init(Rng& rng) {
  patch_conv.init(rng);
  for (auto& s : stages) {
    if (s.downsample) s.down.init(rng);
    for (auto& b : s.blocks) b.init(rng);
  }
}

template <typename T>
Tensor<T> Backbone<T>::patch_embed(const Tensor<T>& x, Mode mode,
                                   PatchCache* cache) const {
  const Shape xs = x.shape();
  require_nonempty(xs, "patch_embed");
  if (xs.c != config_.in_channels) {
    throw ShapeError("patch_embed: expected " +
                     std::to_string(config_.in_channels) +
                     " input channels, got " + xs.str());
  }
  const std::int64_t s = config_.patch.stride;
  if (xs.h % s != 0 || xs.w % s != 0 || xs.h < config_.patch.kernel ||
      xs.w < config_.patch.kernel) {
    throw ShapeError("patch_embed: input " + xs.str() +
                     " not divisible by patch stride " + std::to_string(s));
  }
  Tensor<T> y = patch_conv.forward(x, cache ? &cache->conv : nullptr);
  return patch_norm.forward(y, mode, cache ? &cache->norm : nullptr);
}

template <typename T>
Tensor<T> Backbone<T>::patch_embed_backward(const Tensor<T>& grad_out,
                                            const PatchCache& cache) {
  return patch_conv.backward(patch_norm.backward(grad_out, cache.norm), cache.conv);
}

template <typename T>
std::vector<Tensor<T>> Backbone<T>::forward(const Tensor<T>& x, Mode mode,
                                            Cache* cache) const {
  config_.check_input_size(x.shape().h, x.shape().w);
  if (cache) cache->stages.assign(stages.size(), {});
  Tensor<T> h = patch_embed(x, mode, cache ? &cache->patch : nullptr);
  std::vector<Tensor<T>> features;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const Stage& st = stages[i];
    StageCache* sc = cache ? &cache->stages[i] : nullptr;
    if (st.downsample) {
      h = st.down.forward(h, sc ? &sc->down : nullptr);
      h = st.down_norm.forward(h, mode, sc ? &sc->down_norm : nullptr);
    }
    if (sc) sc->blocks.assign(st.blocks.size(), {});
    for (std::size_t j = 0; j < st.blocks.size(); ++j) {
      h = st.blocks[j].forward(h, mode, sc ? &sc->blocks[j] : nullptr);
    }
    features.push_back(h);
  }
  return features;
}

template <typename T>
Tensor<T> Backbone<T>::backward(std::span<const Tensor<T>> grad_features,
                                const Cache& cache) {
  if (grad_features.size() != stages.size()) {
    throw ShapeError("backbone backward: expected " +
                     std::to_string(stages.size()) + " stage gradients");
  }
  Tensor<T> g;
  for (std::size_t k = stages.size(); k-- > 0;) {
    Stage& st = stages[k];
    const StageCache& sc = cache.stages[k];
    if (!grad_features[k].empty()) {
      if (g.empty()) {
        g = grad_features[k];
      } else {
        accumulate(g, grad_features[k]);
      }
    }
    if (g.empty()) continue;
    for (std::size_t j = st.blocks.size(); j-- > 0;) {
      g = st.blocks[j].backward(g, sc.blocks[j]);
    }
    if (st.downsample) {
      g = st.down.backward(st.down_norm.backward(g, sc.down_norm), sc.down);
    }
  }
  if (g.empty()) throw ShapeError("backbone backward: no gradient given");
  return patch_embed_backward(g, cache.patch);
}

template <typename T>
void Backbone<T>::visit(const ParamVisitor<T>& fn) {
  patch_conv.visit(fn);
  patch_norm.visit(fn);
  for (auto& s : stages) {
    if (s.downsample) {
      s.down.visit(fn);
      s.down_norm.visit(fn);
    }
    for (auto& b : s.blocks) b.visit(fn);
  }
}

template <typename T>
void Backbone<T>::visit_buffers(const BufferVisitor<T>& fn) {
  patch_norm.visit_buffers(fn);
  for (auto& s : stages) {
    if (s.downsample) s.down_norm.visit_buffers(fn);
    for (auto& b : s.blocks) b.visit_buffers(fn);
  }
}

template <typename T>
void Backbone<T>::set_residual_scales(T value) {
  for (auto& s : stages) {
    for (auto& b : s.blocks) b.set_residual_scales(value);
  }
}

// --- HeatmapHead ------------------------------------------------------------

template <typename T>
HeatmapHead<T>::HeatmapHead(const std::string& name, std::int64_t channels)
    : conv(name + ".conv", ConvSpec::pointwise(channels, 1), true) {}

template <typename T>
void HeatmapHead<T>::init(Rng& rng) {
  conv.init(rng);
}

template <typename T>
Tensor<T> HeatmapHead<T>::forward(const Tensor<T>& features, Cache* cache) const {
  return conv.forward(features, cache);
}

template <typename T>
Tensor<T> HeatmapHead<T>::backward(const Tensor<T>& grad_out, const Cache& cache) {
  return conv.backward(grad_out, cache);
}

// --- Model ------------------------------------------------------------------

template <typename T>
Model<T>::Model(const BackboneConfig& config)
    : backbone(config),
      head("head", config.stages.back().channels),
      config_(config) {}

template <typename T>
Model<T>::Model(const BackboneConfig& config, std::uint64_t seed) : Model(config) {
  Rng rng(seed);
  init(rng);
}

template <typename T>
void Model<T>::init(Rng& rng) {
  Rng backbone_rng = rng.fork(1);
  Rng head_rng = rng.fork(2);
  backbone.init(backbone_rng);
  head.init(head_rng);
}

template <typename T>
std::vector<Tensor<T>> Model<T>::features(const Tensor<T>& x, Mode mode,
                                          Cache* cache) const {
  return backbone.forward(x, mode, cache ? &cache->backbone : nullptr);
}

template <typename T>
Tensor<T> Model<T>::forward(const Tensor<T>& x, Mode mode, Cache* cache) const {
  std::vector<Tensor<T>> f = features(x, mode, cache);
  return head.forward(f.back(), cache ? &cache->head : nullptr);
}

template <typename T>
Tensor<T> Model<T>::backward(const Tensor<T>& grad_logits, const Cache& cache) {
  std::vector<Tensor<T>> grads(backbone.stages.size());
  grads.back() = head.backward(grad_logits, cache.head);
  return backbone.backward(grads, cache.backbone);
}

template <typename T>
void Model<T>::visit(const ParamVisitor<T>& fn) {
  backbone.visit(fn);
  head.visit(fn);
}

template <typename T>
void Model<T>::visit_buffers(const BufferVisitor<T>& fn) {
  backbone.visit_buffers(fn);
}

template <typename T>
void Model<T>::zero_grad() {
  visit([](Param<T>& p) { p.zero_grad(); });
}

template <typename T>
std::map<std::string, Param<T>*> Model<T>::named_params() {
  std::map<std::string, Param<T>*> out;
  visit([&out](Param<T>& p) {
    if (!out.emplace(p.name, &p).second) {
      throw SpecError("duplicate parameter name " + p.name);
    }
  });
  return out;
}

template <typename T>
std::vector<Param<T>*> Model<T>::params() {
  std::vector<Param<T>*> out;
  visit([&out](Param<T>& p) { out.push_back(&p); });
  return out;
}

template <typename T>
std::int64_t count_params(Model<T>& model) {
  std::int64_t total = 0;
  model.visit([&total](Param<T>& p) { total += p.value.numel(); });
  return total;
}

template class Backbone<float>;
template class Backbone<double>;
template class HeatmapHead<float>;
template class HeatmapHead<double>;
template class Model<float>;
template class Model<double>;
template std::int64_t count_params(Model<float>&);
template std::int64_t count_params(Model<double>&);

}  // namespace mks

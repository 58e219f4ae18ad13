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

#ifndef MKS_BACKBONE_HPP_
#define MKS_BACKBONE_HPP_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mks/block.hpp"

namespace mks {

struct PatchEmbedConfig {
  std::int64_t kernel = 4;
  std::int64_t stride = 4;
  std::int64_t channels = 32;
};

struct StageConfig {
  std::int64_t depth = 1;
  std::int64_t channels = 32;
  std::int64_t branches = 2;
  std::int64_t max_size = 7;
  std::int64_t reduction = 4;
  // Stride-2 3x3 conv + BN in front of the stage.
  bool downsample = false;
};

struct BackboneConfig {
  std::int64_t in_channels = 3;
  PatchEmbedConfig patch;
  std::vector<StageConfig> stages;
  BlockLayout layout;
  std::int64_t attention_kernel = 7;
  Activation activation = Activation::kRelu;

  // Patch 4x4/4 to 32 channels, then depths [1, 2, 1] at widths
  // [32, 64, 128], S = 2, max_size = 7, r = 4, stride-2 downsampling
  // between stages.
  static BackboneConfig tiny();

  // Throws ConfigError naming the offending field.
  void validate() const;
  std::int64_t total_stride() const;
  // Throws ShapeError unless an (H, W) input fits the strides.
  void check_input_size(std::int64_t height, std::int64_t width) const;
  BlockConfig block_config(std::size_t stage) const;
};

template <typename T>
class Backbone {
 public:
  struct StageCache {
    typename Conv2d<T>::Cache down;
    typename BatchNorm2d<T>::Cache down_norm;
    std::vector<typename MKSBlock<T>::Cache> blocks;
  };
  struct PatchCache {
    typename Conv2d<T>::Cache conv;
    typename BatchNorm2d<T>::Cache norm;
  };
  struct Cache {
    PatchCache patch;
    std::vector<StageCache> stages;
  };

  struct Stage {
    bool downsample = false;
    Conv2d<T> down;
    BatchNorm2d<T> down_norm;
    std::vector<MKSBlock<T>> blocks;
  };

  Backbone() = default;
  explicit Backbone(const BackboneConfig& config);

  void init(Rng& rng);

  // Strided convolution + BN; (B, in, H, W) -> (B, C0, H/s, W/s).
  Tensor<T> patch_embed(const Tensor<T>& x, Mode mode, PatchCache* cache) const;
  Tensor<T> patch_embed_backward(const Tensor<T>& grad_out,
                                 const PatchCache& cache);

  // One feature map per stage.
  std::vector<Tensor<T>> forward(const Tensor<T>& x, Mode mode,
                                 Cache* cache) const;
  // grad_features[i] may be empty for stages that receive no gradient.
  Tensor<T> backward(std::span<const Tensor<T>> grad_features,
                     const Cache& cache);

  void visit(const ParamVisitor<T>& fn);
  void visit_buffers(const BufferVisitor<T>& fn);
  void set_residual_scales(T value);

  const BackboneConfig& config() const { return config_; }

  Conv2d<T> patch_conv;
  BatchNorm2d<T> patch_norm;
  std::vector<Stage> stages;

 private:
  BackboneConfig config_;
};

// 1x1 conv from the last stage to one logit per cell.
template <typename T>
class HeatmapHead {
 public:
  using Cache = typename Conv2d<T>::Cache;

  HeatmapHead() = default;
  HeatmapHead(const std::string& name, std::int64_t channels);

  void init(Rng& rng);
  Tensor<T> forward(const Tensor<T>& features, Cache* cache) const;
  Tensor<T> backward(const Tensor<T>& grad_out, const Cache& cache);
  void visit(const ParamVisitor<T>& fn) { conv.visit(fn); }

  Conv2d<T> conv;
};

// Backbone + head: the complete set of named parameters and running stats.
template <typename T>
class Model {
 public:
  struct Cache {
    typename Backbone<T>::Cache backbone;
    typename HeatmapHead<T>::Cache head;
  };

  explicit Model(const BackboneConfig& config);
  Model(const BackboneConfig& config, std::uint64_t seed);

  void init(Rng& rng);

  std::vector<Tensor<T>> features(const Tensor<T>& x, Mode mode,
                                  Cache* cache) const;
  // Logits (B, 1, h, w) at the last stage resolution.
  Tensor<T> forward(const Tensor<T>& x, Mode mode, Cache* cache) const;
  // Returns the input gradient; parameter gradients accumulate.
  Tensor<T> backward(const Tensor<T>& grad_logits, const Cache& cache);

  void visit(const ParamVisitor<T>& fn);
  void visit_buffers(const BufferVisitor<T>& fn);
  void zero_grad();

  // Name -> parameter, in registration order of names. Throws SpecError on
  // duplicate names.
  std::map<std::string, Param<T>*> named_params();
  std::vector<Param<T>*> params();

  const BackboneConfig& config() const { return config_; }

  Backbone<T> backbone;
  HeatmapHead<T> head;

 private:
  BackboneConfig config_;
};

// Sum of parameter value lengths (running stats excluded).
template <typename T>
std::int64_t count_params(Model<T>& model);

extern template class Backbone<float>;
extern template class Backbone<double>;
extern template class HeatmapHead<float>;
extern template class HeatmapHead<double>;
extern template class Model<float>;
extern template class Model<double>;

}  // namespace mks

#endif  // MKS_BACKBONE_HPP_

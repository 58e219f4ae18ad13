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

#ifndef MKS_BLOCK_HPP_
#define MKS_BLOCK_HPP_

#include <optional>
#include <string>

#include "mks/attention.hpp"

namespace mks {

// Which residual sub-layers a block carries. The MKS block is {ca, sa};
// ablation variants add the local mixer and toggle ca / sa individually.
struct BlockLayout {
  bool local = false;
  bool channel_attention = true;
  bool spatial_attention = true;

  friend bool operator==(const BlockLayout&, const BlockLayout&) = default;
};

struct BlockConfig {
  std::int64_t channels = 0;
  std::int64_t branches = 2;
  std::int64_t max_size = 7;
  std::int64_t reduction = 4;
  std::int64_t attention_kernel = 7;
  Activation activation = Activation::kRelu;
  BlockLayout layout;
};

// BN -> depthwise 3x3 -> ReLU -> pointwise 1x1. The attention-free baseline.
template <typename T>
class LocalMixer {
 public:
  struct Cache {
    typename BatchNorm2d<T>::Cache norm;
    typename Conv2d<T>::Cache depthwise;
    Tensor<T> pre_activation;
    typename Conv2d<T>::Cache pointwise;
  };

  LocalMixer() = default;
  LocalMixer(const std::string& name, std::int64_t channels);

  void init(Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, Mode mode, Cache* cache) const;
  Tensor<T> backward(const Tensor<T>& grad_out, const Cache& cache);
  void visit(const ParamVisitor<T>& fn);
  void visit_buffers(const BufferVisitor<T>& fn);

  BatchNorm2d<T> norm;
  Conv2d<T> depthwise;
  Conv2d<T> pointwise;
};

// y = x + l_local * local(x)     (if enabled)
// y = y + l_ca * ca(bn_ca(y))    (if enabled)
// y = y + l_sa * sa(bn_sa(y))    (if enabled)
// Residual scales are per-channel and start at 1.
template <typename T>
class MKSBlock {
 public:
  struct Cache {
    typename LocalMixer<T>::Cache local;
    typename ChannelScale<T>::Cache local_scale;
    typename BatchNorm2d<T>::Cache ca_norm;
    typename ChannelAttention<T>::Cache ca;
    typename ChannelScale<T>::Cache ca_scale;
    typename BatchNorm2d<T>::Cache sa_norm;
    typename SpatialAttention<T>::Cache sa;
    typename ChannelScale<T>::Cache sa_scale;
  };

  MKSBlock() = default;
  MKSBlock(const std::string& name, const BlockConfig& config);

  void init(Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, Mode mode, Cache* cache) const;
  Tensor<T> backward(const Tensor<T>& grad_out, const Cache& cache);
  void visit(const ParamVisitor<T>& fn);
  void visit_buffers(const BufferVisitor<T>& fn);
  void set_residual_scales(T value);

  const BlockConfig& config() const { return config_; }

  std::optional<LocalMixer<T>> local;
  std::optional<ChannelAttention<T>> ca;
  std::optional<SpatialAttention<T>> sa;
  BatchNorm2d<T> ca_norm;
  BatchNorm2d<T> sa_norm;
  ChannelScale<T> local_scale;
  ChannelScale<T> ca_scale;
  ChannelScale<T> sa_scale;

 private:
  BlockConfig config_;
};

extern template class LocalMixer<float>;
extern template class LocalMixer<double>;
extern template class MKSBlock<float>;
extern template class MKSBlock<double>;

}  // namespace mks

#endif  // MKS_BLOCK_HPP_

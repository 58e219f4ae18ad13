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

#include "mks/block.hpp"

namespace mks {

template <typename T>
LocalMixer<T>::LocalMixer(const std::string& name, std::int64_t channels)
    : norm(name + ".norm", channels),
      depthwise(name + ".depthwise", ConvSpec::depthwise(channels, 3, 1, 1), true),
      pointwise(name + ".pointwise", ConvSpec::pointwise(channels, channels),
                true) {}

template <typename T>
void LocalMixer<T>::init(Rng& rng) {
  depthwise.init(rng);
  pointwise.init(rng);
}

template <typename T>
Tensor<T> LocalMixer<T>::forward(const Tensor<T>& x, Mode mode,
                                 Cache* cache) const {
  Tensor<T> h = norm.forward(x, mode, cache ? &cache->norm : nullptr);
  h = depthwise.forward(h, cache ? &cache->depthwise : nullptr);
  Tensor<T> a = relu(h);
  if (cache) cache->pre_activation = std::move(h);
  return pointwise.forward(a, cache ? &cache->pointwise : nullptr);
}

template <typename T>
Tensor<T> LocalMixer<T>::backward(const Tensor<T>& grad_out, const Cache& cache) {
  Tensor<T> g = pointwise.backward(grad_out, cache.pointwise);
  g = relu_backward(g, cache.pre_activation);
  g = depthwise.backward(g, cache.depthwise);
  return norm.backward(g, cache.norm);
}

template <typename T>
void LocalMixer<T>::visit(const ParamVisitor<T>& fn) {
  norm.visit(fn);
  depthwise.visit(fn);
  pointwise.visit(fn);
}

template <typename T>
void LocalMixer<T>::visit_buffers(const BufferVisitor<T>& fn) {
  norm.visit_buffers(fn);
}

template <typename T>
MKSBlock<T>::MKSBlock(const std::string& name, const BlockConfig& config)
    : config_(config) {
  const std::int64_t c = config.channels;
  if (config.layout.local) {
    local.emplace(name + ".local", c);
    local_scale = ChannelScale<T>(name + ".local_scale", c, T(1));
  }
  if (config.layout.channel_attention) {
    ca_norm = BatchNorm2d<T>(name + ".ca_norm", c);
    ca.emplace(name + ".ca",
               ChannelAttentionConfig{c, config.reduction, config.activation});
    ca_scale = ChannelScale<T>(name + ".ca_scale", c, T(1));
  }
  if (config.layout.spatial_attention) {
    sa_norm = BatchNorm2d<T>(name + ".sa_norm", c);
    sa.emplace(name + ".sa",
               SpatialAttentionConfig{c, config.branches, config.max_size,
                                      config.attention_kernel, config.activation});
    sa_scale = ChannelScale<T>(name + ".sa_scale", c, T(1));
  }
}

template <typename T>
void MKSBlock<T>::init(Rng& rng) {
  if (local) local->init(rng);
  if (ca) ca->init(rng);
  if (sa) sa->init(rng);
}

template <typename T>
Tensor<T> MKSBlock<T>::forward(const Tensor<T>& x, Mode mode,
                               Cache* cache) const {
  Tensor<T> y = x;
  if (local) {
    Tensor<T> r = local->forward(y, mode, cache ? &cache->local : nullptr);
    accumulate(y, local_scale.forward(r, cache ? &cache->local_scale : nullptr));
  }
  if (ca) {
    const Tensor<T> h = ca_norm.forward(y, mode, cache ? &cache->ca_norm : nullptr);
    Tensor<T> r = ca->forward(h, mode, cache ? &cache->ca : nullptr);
    accumulate(y, ca_scale.forward(r, cache ? &cache->ca_scale : nullptr));
  }
  if (sa) {
    const Tensor<T> h = sa_norm.forward(y, mode, cache ? &cache->sa_norm : nullptr);
    Tensor<T> r = sa->forward(h, mode, cache ? &cache->sa : nullptr);
    accumulate(y, sa_scale.forward(r, cache ? &cache->sa_scale : nullptr));
  }
  return y;
}

template <typename T>
Tensor<T> MKSBlock<T>::backward(const Tensor<T>& grad_out, const Cache& cache) {
  Tensor<T> g = grad_out;
  if (sa) {
    const Tensor<T> gh = sa->backward(sa_scale.backward(g, cache.sa_scale), cache.sa);
    accumulate(g, sa_norm.backward(gh, cache.sa_norm));
  }
  if (ca) {
    const Tensor<T> gh = ca->backward(ca_scale.backward(g, cache.ca_scale), cache.ca);
    accumulate(g, ca_norm.backward(gh, cache.ca_norm));
  }
  if (local) {
    accumulate(g, local->backward(local_scale.backward(g, cache.local_scale),
                                  cache.local));
  }
  return g;
}

template <typename T>
void MKSBlock<T>::visit(const ParamVisitor<T>& fn) {
  if (local) {
    local->visit(fn);
    local_scale.visit(fn);
  }
  if (ca) {
    ca_norm.visit(fn);
    ca->visit(fn);
    ca_scale.visit(fn);
  }
  if (sa) {
    sa_norm.visit(fn);
    sa->visit(fn);
    sa_scale.visit(fn);
  }
}

template <typename T>
void MKSBlock<T>::visit_buffers(const BufferVisitor<T>& fn) {
  if (local) local->visit_buffers(fn);
  if (ca) ca_norm.visit_buffers(fn);
  if (sa) {
    sa_norm.visit_buffers(fn);
    sa->visit_buffers(fn);
  }
}

template <typename T>
void MKSBlock<T>::set_residual_scales(T value) {
  if (local) local_scale.scale.value.fill(value);
  if (ca) ca_scale.scale.value.fill(value);
  if (sa) sa_scale.scale.value.fill(value);
}

template class LocalMixer<float>;
template class LocalMixer<double>;
template class MKSBlock<float>;
template class MKSBlock<double>;

}  // namespace mks

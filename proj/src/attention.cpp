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

#include "mks/attention.hpp"

#include <algorithm>

namespace mks {

KernelSchedule build_schedule(std::int64_t branches, std::int64_t max_size) {
  if (branches < 1) {
    throw SpecError("kernel schedule needs at least one branch, got " +
                    std::to_string(branches));
  }
  if (max_size < 5 || max_size % 2 == 0) {
    throw SpecError("kernel schedule max_size must be odd and >= 5, got " +
                    std::to_string(max_size));
  }
  KernelSchedule schedule{branches, max_size, {}};
  schedule.entries.reserve(static_cast<std::size_t>(branches));
  for (std::int64_t i = 0; i < branches; ++i) {
    const std::int64_t k = std::min<std::int64_t>(5 + 2 * i, max_size);
    const std::int64_t d = i + 1;
    schedule.entries.push_back({k, d, (k - 1) * d / 2});
  }
  return schedule;
}

// ===========================================================================
// SpatialAttention

template <typename T>
SpatialAttention<T>::SpatialAttention(const std::string& name,
                                      const SpatialAttentionConfig& config)
    : config_(config), schedule_(build_schedule(config.branches, config.max_size)) {
  const std::int64_t c = config.channels;
  if (c < 1 || c % config.branches != 0) {
    throw SpecError(name + ": channels " + std::to_string(c) +
                    " not divisible by branch count " +
                    std::to_string(config.branches));
  }
  if (config.attention_kernel < 1 || config.attention_kernel % 2 == 0) {
    throw SpecError(name + ": attention kernel must be odd");
  }
  const std::int64_t part = c / config.branches;
  for (std::int64_t i = 0; i < config.branches; ++i) {
    const KernelEntry& e = schedule_.entries[static_cast<std::size_t>(i)];
    const std::string b = name + ".branch" + std::to_string(i);
    branches.push_back(Branch{
        Conv2d<T>(b + ".spatial",
                  ConvSpec::depthwise(c, e.kernel, e.dilation, e.padding), false),
        BatchNorm2d<T>(b + ".norm", c),
        Conv2d<T>(b + ".pointwise", ConvSpec::pointwise(c, c), true),
        Conv2d<T>(b + ".transform", ConvSpec::pointwise(c, part), true)});
  }
  const std::int64_t ak = config.attention_kernel;
  attention_conv = Conv2d<T>(
      name + ".attention",
      ConvSpec::square(2, config.branches, ak, 1, 1, (ak - 1) / 2), true);
  output_conv = Conv2d<T>(name + ".output", ConvSpec::pointwise(part, c), true);
}

template <typename T>
void SpatialAttention<T>::init(Rng& rng) {
  for (auto& b : branches) {
    b.spatial.init(rng);
    b.pointwise.init(rng);
    b.transform.init(rng);
  }
  attention_conv.init(rng);
  output_conv.init(rng);
}

template <typename T>
void SpatialAttention<T>::check_input(const Shape& s, const char* what) const {
  require_nonempty(s, what);
  if (s.c != config_.channels) {
    throw ShapeError(std::string(what) + ": expected " +
                     std::to_string(config_.channels) + " channels, got " +
                     s.str());
  }
}

template <typename T>
std::vector<Tensor<T>> SpatialAttention<T>::extract(const Tensor<T>& x,
                                                    Mode mode,
                                                    ExtractCache* cache) const {
  check_input(x.shape(), "sa_extract");
  std::vector<Tensor<T>> features;
  features.reserve(branches.size());
  if (cache) cache->branches.assign(branches.size(), {});
  for (std::size_t i = 0; i < branches.size(); ++i) {
    const Branch& b = branches[i];
    BranchCache* bc = cache ? &cache->branches[i] : nullptr;
    Tensor<T> a = b.spatial.forward(x, bc ? &bc->spatial : nullptr);
    a = b.norm.forward(a, mode, bc ? &bc->norm : nullptr);
    Tensor<T> pre = b.pointwise.forward(a, bc ? &bc->pointwise : nullptr);
    Tensor<T> out = activation_forward(config_.activation, pre);
    if (bc) {
      bc->pre_activation = std::move(pre);
      bc->features = out;
    }
    features.push_back(std::move(out));
  }
  return features;
}

template <typename T>
Tensor<T> SpatialAttention<T>::extract_backward(
    std::span<const Tensor<T>> grad_features, const ExtractCache& cache) {
  if (grad_features.size() != branches.size() ||
      cache.branches.size() != branches.size()) {
    throw ShapeError("sa_extract_backward: branch count mismatch");
  }
  Tensor<T> grad_x;
  for (std::size_t i = 0; i < branches.size(); ++i) {
    Branch& b = branches[i];
    const BranchCache& bc = cache.branches[i];
    Tensor<T> g = activation_backward(config_.activation, grad_features[i],
                                      bc.pre_activation, bc.features);
    g = b.pointwise.backward(g, bc.pointwise);
    g = b.norm.backward(g, bc.norm);
    g = b.spatial.backward(g, bc.spatial);
    if (i == 0) {
      grad_x = std::move(g);
    } else {
      accumulate(grad_x, g);
    }
  }
  return grad_x;
}

template <typename T>
typename SpatialAttention<T>::Transformed SpatialAttention<T>::transform(
    std::span<const Tensor<T>> features, TransformCache* cache) const {
  if (features.size() != branches.size()) {
    throw ShapeError("sa_transform: got " + std::to_string(features.size()) +
                     " feature maps for " + std::to_string(branches.size()) +
                     " branches");
  }
  Transformed out;
  if (cache) cache->convs.assign(branches.size(), {});
  for (std::size_t i = 0; i < branches.size(); ++i) {
    out.parts.push_back(branches[i].transform.forward(
        features[i], cache ? &cache->convs[i] : nullptr));
  }
  out.joined = concat_channels<T>(out.parts);
  return out;
}

template <typename T>
std::vector<Tensor<T>> SpatialAttention<T>::transform_backward(
    std::span<const Tensor<T>> grad_parts, const Tensor<T>* grad_joined,
    const TransformCache& cache) {
  const auto s = static_cast<std::int64_t>(branches.size());
  if (!grad_parts.empty() && static_cast<std::int64_t>(grad_parts.size()) != s) {
    throw ShapeError("sa_transform_backward: branch count mismatch");
  }
  std::vector<Tensor<T>> joined_parts;
  if (grad_joined) joined_parts = split_channels(*grad_joined, s);

  std::vector<Tensor<T>> grads;
  for (std::int64_t i = 0; i < s; ++i) {
    const auto k = static_cast<std::size_t>(i);
    Tensor<T> g;
    if (!grad_parts.empty()) g = grad_parts[k];
    if (grad_joined) {
      if (g.empty()) {
        g = std::move(joined_parts[k]);
      } else {
        accumulate(g, joined_parts[k]);
      }
    }
    if (g.empty()) throw ShapeError("sa_transform_backward: no gradient given");
    grads.push_back(branches[k].transform.backward(g, cache.convs[k]));
  }
  return grads;
}

template <typename T>
Tensor<T> SpatialAttention<T>::attention(const Tensor<T>& joined,
                                         AttentionCache* cache) const {
  require_nonempty(joined.shape(), "sa_attention");
  std::vector<std::int64_t> max_index;
  const Tensor<T> stats[2] = {channel_mean(joined),
                              channel_max(joined, &max_index)};
  Tensor<T> logits = attention_conv.forward(concat_channels<T>(stats),
                                            cache ? &cache->conv : nullptr);
  Tensor<T> weights = sigmoid(logits);
  if (cache) {
    cache->input_shape = joined.shape();
    cache->max_index = std::move(max_index);
    cache->weights = weights;
  }
  return weights;
}

template <typename T>
Tensor<T> SpatialAttention<T>::attention_backward(const Tensor<T>& grad_weights,
                                                  const AttentionCache& cache) {
  Tensor<T> g = sigmoid_backward(grad_weights, cache.weights);
  g = attention_conv.backward(g, cache.conv);
  Tensor<T> grad = channel_mean_backward(slice_channels(g, 0, 1), cache.input_shape);
  accumulate(grad, channel_max_backward(slice_channels(g, 1, 1),
                                        std::span<const std::int64_t>(cache.max_index),
                                        cache.input_shape));
  return grad;
}

template <typename T>
Tensor<T> SpatialAttention<T>::fuse(const Tensor<T>& x,
                                    std::span<const Tensor<T>> parts,
                                    const Tensor<T>& weights,
                                    FuseCache* cache) const {
  check_input(x.shape(), "sa_fuse");
  const Shape ws = weights.shape();
  const auto s = static_cast<std::int64_t>(parts.size());
  if (s != config_.branches || ws.c != s) {
    throw ShapeError("sa_fuse: " + std::to_string(parts.size()) +
                     " branch maps and " + std::to_string(ws.c) +
                     " attention channels for " +
                     std::to_string(config_.branches) + " branches");
  }
  const Shape part_shape{x.shape().n, part_channels(), x.shape().h, x.shape().w};
  if (!(ws == Shape{part_shape.n, s, part_shape.h, part_shape.w})) {
    throw ShapeError("sa_fuse: attention map " + ws.str() +
                     " does not match input " + x.shape().str());
  }
  std::vector<Tensor<T>> per_branch = split_channels(weights, s);
  Tensor<T> fused(part_shape);
  for (std::int64_t i = 0; i < s; ++i) {
    const auto k = static_cast<std::size_t>(i);
    require_same_shape(parts[k].shape(), part_shape, "sa_fuse branch map");
    accumulate(fused, mul_broadcast(parts[k], per_branch[k]));
  }
  Tensor<T> refined = output_conv.forward(fused, cache ? &cache->output : nullptr);
  Tensor<T> out = mul_broadcast(x, refined);
  if (cache) {
    cache->input = x;
    cache->parts.assign(parts.begin(), parts.end());
    cache->weights = std::move(per_branch);
    cache->refined = std::move(refined);
  }
  return out;
}

template <typename T>
typename SpatialAttention<T>::FuseGrads SpatialAttention<T>::fuse_backward(
    const Tensor<T>& grad_out, const FuseCache& cache) {
  FuseGrads grads;
  grads.input = mul_broadcast(grad_out, cache.refined);
  Tensor<T> grad_fused =
      output_conv.backward(mul_broadcast(grad_out, cache.input), cache.output);
  std::vector<Tensor<T>> grad_weights;
  for (std::size_t i = 0; i < cache.parts.size(); ++i) {
    BinaryGrads<T> g =
        mul_broadcast_backward(grad_fused, cache.parts[i], cache.weights[i]);
    grads.parts.push_back(std::move(g.a));
    grad_weights.push_back(std::move(g.b));
  }
  grads.weights = concat_channels<T>(grad_weights);
  return grads;
}

template <typename T>
Tensor<T> SpatialAttention<T>::forward(const Tensor<T>& x, Mode mode,
                                       Cache* cache) const {
  std::vector<Tensor<T>> features =
      extract(x, mode, cache ? &cache->extract : nullptr);
  Transformed t = transform(features, cache ? &cache->transform : nullptr);
  Tensor<T> weights = attention(t.joined, cache ? &cache->attention : nullptr);
  return fuse(x, t.parts, weights, cache ? &cache->fuse : nullptr);
}

template <typename T>
Tensor<T> SpatialAttention<T>::backward(const Tensor<T>& grad_out,
                                        const Cache& cache) {
  FuseGrads fg = fuse_backward(grad_out, cache.fuse);
  Tensor<T> grad_joined = attention_backward(fg.weights, cache.attention);
  std::vector<Tensor<T>> grad_features =
      transform_backward(fg.parts, &grad_joined, cache.transform);
  Tensor<T> grad_x = extract_backward(grad_features, cache.extract);
  accumulate(grad_x, fg.input);
  return grad_x;
}

template <typename T>
void SpatialAttention<T>::visit(const ParamVisitor<T>& fn) {
  for (auto& b : branches) {
    b.spatial.visit(fn);
    b.norm.visit(fn);
    b.pointwise.visit(fn);
    b.transform.visit(fn);
  }
  attention_conv.visit(fn);
  output_conv.visit(fn);
}

template <typename T>
void SpatialAttention<T>::visit_buffers(const BufferVisitor<T>& fn) {
  for (auto& b : branches) b.norm.visit_buffers(fn);
}

// ===========================================================================
// ChannelAttention

template <typename T>
ChannelAttention<T>::ChannelAttention(const std::string& name,
                                      const ChannelAttentionConfig& config)
    : config_(config) {
  const std::int64_t c = config.channels;
  if (c < 1 || config.reduction < 1 || c % config.reduction != 0) {
    throw SpecError(name + ": channels " + std::to_string(c) +
                    " not divisible by reduction " +
                    std::to_string(config.reduction));
  }
  const std::int64_t hidden = c / config.reduction;
  avg_reduce = Linear<T>(name + ".avg_reduce", c, hidden);
  avg_expand = Linear<T>(name + ".avg_expand", hidden, c);
  max_reduce = Linear<T>(name + ".max_reduce", c, hidden);
  max_expand = Linear<T>(name + ".max_expand", hidden, c);
  mix = Linear<T>(name + ".mix", c, c);
}

template <typename T>
void ChannelAttention<T>::init(Rng& rng) {
  avg_reduce.init(rng);
  avg_expand.init(rng);
  max_reduce.init(rng);
  max_expand.init(rng);
  mix.init(rng);
}

template <typename T>
Tensor<T> ChannelAttention<T>::run_path(const Linear<T>& reduce,
                                        const Linear<T>& expand,
                                        const Tensor<T>& pooled,
                                        PathCache* cache) const {
  Tensor<T> hidden_pre = reduce.forward(pooled, cache ? &cache->reduce : nullptr);
  Tensor<T> hidden = activation_forward(config_.activation, hidden_pre);
  Tensor<T> out_pre = expand.forward(hidden, cache ? &cache->expand : nullptr);
  Tensor<T> out = activation_forward(config_.activation, out_pre);
  if (cache) {
    cache->hidden_pre = std::move(hidden_pre);
    cache->hidden = std::move(hidden);
    cache->out_pre = std::move(out_pre);
    cache->out = out;
  }
  return out;
}

template <typename T>
Tensor<T> ChannelAttention<T>::path_backward(Linear<T>& reduce,
                                             Linear<T>& expand,
                                             const Tensor<T>& grad,
                                             const PathCache& cache) {
  Tensor<T> g =
      activation_backward(config_.activation, grad, cache.out_pre, cache.out);
  g = expand.backward(g, cache.expand);
  g = activation_backward(config_.activation, g, cache.hidden_pre, cache.hidden);
  return reduce.backward(g, cache.reduce);
}

template <typename T>
Tensor<T> ChannelAttention<T>::forward(const Tensor<T>& x, Mode /*mode*/,
                                       Cache* cache) const {
  require_nonempty(x.shape(), "ca_forward");
  if (x.shape().c != config_.channels) {
    throw ShapeError("ca_forward: expected " + std::to_string(config_.channels) +
                     " channels, got " + x.shape().str());
  }
  std::vector<std::int64_t> max_index;
  Tensor<T> a = run_path(avg_reduce, avg_expand, global_avg_pool(x),
                         cache ? &cache->avg : nullptr);
  Tensor<T> m = run_path(max_reduce, max_expand, global_max_pool(x, &max_index),
                         cache ? &cache->max : nullptr);
  Tensor<T> mixed = scale(add(a, m), T(0.5));
  Tensor<T> g = sigmoid(mix.forward(mixed, cache ? &cache->mix : nullptr));
  Tensor<T> out = mul_broadcast(x, g);
  if (cache) {
    cache->input = x;
    cache->max_index = std::move(max_index);
    cache->gate = std::move(g);
  }
  return out;
}

template <typename T>
Tensor<T> ChannelAttention<T>::backward(const Tensor<T>& grad_out,
                                        const Cache& cache) {
  BinaryGrads<T> g = mul_broadcast_backward(grad_out, cache.input, cache.gate);
  Tensor<T> grad_mixed =
      mix.backward(sigmoid_backward(g.b, cache.gate), cache.mix);
  const Tensor<T> half = scale(grad_mixed, T(0.5));
  const Shape xs = cache.input.shape();
  Tensor<T> grad_x = std::move(g.a);
  accumulate(grad_x, global_avg_pool_backward(
                         path_backward(avg_reduce, avg_expand, half, cache.avg), xs));
  accumulate(grad_x,
             global_max_pool_backward(
                 path_backward(max_reduce, max_expand, half, cache.max),
                 std::span<const std::int64_t>(cache.max_index), xs));
  return grad_x;
}

template <typename T>
Tensor<T> ChannelAttention<T>::gate(const Tensor<T>& x) const {
  Cache cache;
  forward(x, Mode::kEval, &cache);
  return cache.gate;
}

template <typename T>
void ChannelAttention<T>::visit(const ParamVisitor<T>& fn) {
  avg_reduce.visit(fn);
  avg_expand.visit(fn);
  max_reduce.visit(fn);
  max_expand.visit(fn);
  mix.visit(fn);
}

template class SpatialAttention<float>;
template class SpatialAttention<double>;
template class ChannelAttention<float>;
template class ChannelAttention<double>;

}  // namespace mks

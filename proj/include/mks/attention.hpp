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

#ifndef MKS_ATTENTION_HPP_
#define MKS_ATTENTION_HPP_

// Multi-kernel selection spatial attention (SA) and pooled channel
// attention (CA).
//
// SA, for input x with C channels and S branches:
//   X~_i = act(PW_i(BN_i(DW_i(x))))         DW_i: depthwise k_i x k_i, dilation d_i
//   T_i  = TR_i(X~_i)                        C -> C/S
//   T    = concat(T_1 .. T_S)
//   Sig  = sigmoid(ATT(concat(mean_c(T), max_c(T))))     2 -> S channels
//   P    = sum_i T_i * Sig_i                 Sig_i broadcast over C/S channels
//   O    = x * OUT(P)                        C/S -> C
//
// CA:
//   A~ = act(E_a(act(R_a(avgpool(x)))))      R: C -> C/r, E: C/r -> C
//   M~ = act(E_m(act(R_m(maxpool(x)))))
//   O  = x * sigmoid(F((A~ + M~) / 2))       F: C -> C

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mks/layers.hpp"

namespace mks {

// One branch of the multi-kernel schedule.
struct KernelEntry {
  std::int64_t kernel = 0;
  std::int64_t dilation = 0;
  std::int64_t padding = 0;

  // Input extent touched by one output pixel.
  std::int64_t span() const { return (kernel - 1) * dilation + 1; }
  friend bool operator==(const KernelEntry&, const KernelEntry&) = default;
};

struct KernelSchedule {
  std::int64_t branches = 0;
  std::int64_t max_size = 0;
  std::vector<KernelEntry> entries;
};

// k_i = min(5 + 2i, max_size), d_i = i + 1, p_i = (k_i - 1) d_i / 2 for
// i = 0 .. branches-1. Requires branches >= 1 and odd max_size >= 5.
KernelSchedule build_schedule(std::int64_t branches, std::int64_t max_size);

struct SpatialAttentionConfig {
  std::int64_t channels = 0;
  std::int64_t branches = 2;
  std::int64_t max_size = 7;
  std::int64_t attention_kernel = 7;
  Activation activation = Activation::kRelu;
};

template <typename T>
class SpatialAttention {
 public:
  struct Branch {
    Conv2d<T> spatial;    // depthwise, schedule entry i
    BatchNorm2d<T> norm;
    Conv2d<T> pointwise;  // C -> C
    Conv2d<T> transform;  // C -> C/S
  };

  struct BranchCache {
    typename Conv2d<T>::Cache spatial;
    typename BatchNorm2d<T>::Cache norm;
    typename Conv2d<T>::Cache pointwise;
    Tensor<T> pre_activation;
    Tensor<T> features;
  };
  struct ExtractCache {
    std::vector<BranchCache> branches;
  };
  struct TransformCache {
    std::vector<typename Conv2d<T>::Cache> convs;
  };
  struct AttentionCache {
    Shape input_shape;
    std::vector<std::int64_t> max_index;
    typename Conv2d<T>::Cache conv;
    Tensor<T> weights;
  };
  struct FuseCache {
    Tensor<T> input;
    std::vector<Tensor<T>> parts;
    std::vector<Tensor<T>> weights;  // Sig_i, (B, 1, H, W) each
    typename Conv2d<T>::Cache output;
    Tensor<T> refined;               // OUT(P)
  };
  struct Cache {
    ExtractCache extract;
    TransformCache transform;
    AttentionCache attention;
    FuseCache fuse;
  };

  struct Transformed {
    std::vector<Tensor<T>> parts;  // T_i
    Tensor<T> joined;              // T
  };
  struct FuseGrads {
    Tensor<T> input;
    std::vector<Tensor<T>> parts;
    Tensor<T> weights;
  };

  SpatialAttention() = default;
  SpatialAttention(const std::string& name, const SpatialAttentionConfig& config);

  void init(Rng& rng);

  std::vector<Tensor<T>> extract(const Tensor<T>& x, Mode mode,
                                 ExtractCache* cache) const;
  Tensor<T> extract_backward(std::span<const Tensor<T>> grad_features,
                             const ExtractCache& cache);

  Transformed transform(std::span<const Tensor<T>> features,
                        TransformCache* cache) const;
  // Either gradient source may be absent (empty span / nullptr).
  std::vector<Tensor<T>> transform_backward(
      std::span<const Tensor<T>> grad_parts, const Tensor<T>* grad_joined,
      const TransformCache& cache);

  Tensor<T> attention(const Tensor<T>& joined, AttentionCache* cache) const;
  Tensor<T> attention_backward(const Tensor<T>& grad_weights,
                               const AttentionCache& cache);

  Tensor<T> fuse(const Tensor<T>& x, std::span<const Tensor<T>> parts,
                 const Tensor<T>& weights, FuseCache* cache) const;
  FuseGrads fuse_backward(const Tensor<T>& grad_out, const FuseCache& cache);

  Tensor<T> forward(const Tensor<T>& x, Mode mode, Cache* cache) const;
  Tensor<T> backward(const Tensor<T>& grad_out, const Cache& cache);

  void visit(const ParamVisitor<T>& fn);
  void visit_buffers(const BufferVisitor<T>& fn);

  const SpatialAttentionConfig& config() const { return config_; }
  const KernelSchedule& schedule() const { return schedule_; }
  std::int64_t part_channels() const { return config_.channels / config_.branches; }

  std::vector<Branch> branches;
  Conv2d<T> attention_conv;  // 2 -> S
  Conv2d<T> output_conv;     // C/S -> C

 private:
  void check_input(const Shape& s, const char* what) const;

  SpatialAttentionConfig config_;
  KernelSchedule schedule_;
};

struct ChannelAttentionConfig {
  std::int64_t channels = 0;
  std::int64_t reduction = 16;
  Activation activation = Activation::kRelu;
};

template <typename T>
class ChannelAttention {
 public:
  // One pooled path: reduce, activation, expand, activation.
  struct PathCache {
    typename Linear<T>::Cache reduce;
    Tensor<T> hidden_pre;
    Tensor<T> hidden;
    typename Linear<T>::Cache expand;
    Tensor<T> out_pre;
    Tensor<T> out;
  };
  struct Cache {
    Tensor<T> input;
    std::vector<std::int64_t> max_index;
    PathCache avg;
    PathCache max;
    typename Linear<T>::Cache mix;
    Tensor<T> gate;  // (B, C, 1, 1), in (0, 1)
  };

  ChannelAttention() = default;
  ChannelAttention(const std::string& name, const ChannelAttentionConfig& config);

  void init(Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, Mode mode, Cache* cache) const;
  Tensor<T> backward(const Tensor<T>& grad_out, const Cache& cache);
  // The per-(batch, channel) multiplier applied to x.
  Tensor<T> gate(const Tensor<T>& x) const;
  void visit(const ParamVisitor<T>& fn);

  const ChannelAttentionConfig& config() const { return config_; }

  Linear<T> avg_reduce;
  Linear<T> avg_expand;
  Linear<T> max_reduce;
  Linear<T> max_expand;
  Linear<T> mix;  // C -> C

 private:
  Tensor<T> run_path(const Linear<T>& reduce, const Linear<T>& expand,
                     const Tensor<T>& pooled, PathCache* cache) const;
  Tensor<T> path_backward(Linear<T>& reduce, Linear<T>& expand,
                          const Tensor<T>& grad, const PathCache& cache);

  ChannelAttentionConfig config_;
};

extern template class SpatialAttention<float>;
extern template class SpatialAttention<double>;
extern template class ChannelAttention<float>;
extern template class ChannelAttention<double>;

}  // namespace mks

#endif  // MKS_ATTENTION_HPP_

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

#ifndef MKS_OPS_HPP_
#define MKS_OPS_HPP_

// Primitive operators on NCHW tensors. Every forward has a matching backward
// that takes the upstream gradient plus whatever the forward saved.

#include <cstdint>
#include <span>
#include <type_traits>
#include <vector>

#include "mks/tensor.hpp"

namespace mks {

enum class Mode { kTrain, kEval };

// Convolution hyperparameters. Zero padding on all sides.
struct ConvSpec {
  std::int64_t in_channels = 1;
  std::int64_t out_channels = 1;
  std::int64_t kernel_h = 1;
  std::int64_t kernel_w = 1;
  std::int64_t stride = 1;
  std::int64_t dilation = 1;
  std::int64_t padding = 0;
  std::int64_t groups = 1;

  static ConvSpec square(std::int64_t in, std::int64_t out, std::int64_t k,
                         std::int64_t stride = 1, std::int64_t dilation = 1,
                         std::int64_t padding = 0, std::int64_t groups = 1) {
    return {in, out, k, k, stride, dilation, padding, groups};
  }
  static ConvSpec depthwise(std::int64_t channels, std::int64_t k,
                            std::int64_t dilation, std::int64_t padding) {
    return {channels, channels, k, k, 1, dilation, padding, channels};
  }
  static ConvSpec pointwise(std::int64_t in, std::int64_t out) {
    return {in, out, 1, 1, 1, 1, 0, 1};
  }

  // Throws SpecError on non-positive counts or indivisible groups.
  void validate() const;
  // (size + 2p - d(k-1) - 1) / stride + 1, floored; SpecError if < 1.
  std::int64_t output_extent(std::int64_t size, std::int64_t kernel) const;
  Shape output_shape(const Shape& input) const;
  Shape weight_shape() const;
  Shape bias_shape() const { return {1, out_channels, 1, 1}; }
  std::int64_t fan_in() const {
    return (in_channels / groups) * kernel_h * kernel_w;
  }
  // Taps per output element times output elements, per sample.
  std::int64_t macs(const Shape& input) const;
};

template <typename T>
struct ConvGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;  // empty when the forward had no bias
};

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& weight,
                         const std::type_identity_t<Tensor<T>>* bias, const ConvSpec& spec);

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& x,
                             const Tensor<T>& weight, const ConvSpec& spec,
                             bool with_bias);

// Running statistics owned by a batch-norm layer.
template <typename T>
struct BatchNormStats {
  Tensor<T> mean;  // (1, C, 1, 1)
  Tensor<T> var;   // (1, C, 1, 1)

  explicit BatchNormStats(std::int64_t channels = 0)
      : mean({1, channels, 1, 1}, T(0)), var({1, channels, 1, 1}, T(1)) {}
};

struct BatchNormOptions {
  double epsilon = 1e-5;
  double momentum = 0.1;
};

template <typename T>
struct BatchNormCache {
  Mode mode = Mode::kEval;
  Tensor<T> normalized;     // x-hat, before the affine map
  std::vector<T> inv_std;   // per channel
};

template <typename T>
struct BatchNormGrads {
  Tensor<T> input;
  Tensor<T> gamma;
  Tensor<T> beta;
};

// Train mode normalizes with biased batch statistics over (B, H, W) and
// folds them into `stats`; eval mode normalizes with `stats`.
template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, const Tensor<T>& gamma,
                            const Tensor<T>& beta, BatchNormStats<T>& stats,
                            Mode mode, const BatchNormOptions& options,
                            std::type_identity_t<BatchNormCache<T>>* cache);

template <typename T>
BatchNormGrads<T> batchnorm_backward(const Tensor<T>& grad_out,
                                     const Tensor<T>& gamma,
                                     const BatchNormCache<T>& cache);

// Spatial reductions to (B, C, 1, 1).
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);
template <typename T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& grad_out,
                                   const Shape& input_shape);

// `argmax` receives the flat input index of the first maximum per (b, c).
template <typename T>
Tensor<T> global_max_pool(const Tensor<T>& x, std::vector<std::int64_t>* argmax);
template <typename T>
Tensor<T> global_max_pool_backward(const Tensor<T>& grad_out,
                                   std::span<const std::int64_t> argmax,
                                   const Shape& input_shape);

// Reductions across the channel axis to (B, 1, H, W).
template <typename T>
Tensor<T> channel_mean(const Tensor<T>& x);
template <typename T>
Tensor<T> channel_mean_backward(const Tensor<T>& grad_out,
                                const Shape& input_shape);

template <typename T>
Tensor<T> channel_max(const Tensor<T>& x, std::vector<std::int64_t>* argmax);
template <typename T>
Tensor<T> channel_max_backward(const Tensor<T>& grad_out,
                               std::span<const std::int64_t> argmax,
                               const Shape& input_shape);

// x: (B, Cin, 1, 1), weight: (Cout, Cin, 1, 1), bias: (1, Cout, 1, 1).
template <typename T>
Tensor<T> fully_connected(const Tensor<T>& x, const Tensor<T>& weight,
                          const std::type_identity_t<Tensor<T>>* bias);

template <typename T>
struct LinearGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
LinearGrads<T> fully_connected_backward(const Tensor<T>& grad_out,
                                        const Tensor<T>& x,
                                        const Tensor<T>& weight,
                                        bool with_bias);

enum class Activation { kIdentity, kRelu, kSigmoid };

const char* activation_name(Activation act);
Activation parse_activation(const std::string& name);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
// Uses the forward output.
template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& grad_out, const Tensor<T>& output);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
// Uses the forward input; the derivative at 0 is taken as 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& input);

template <typename T>
Tensor<T> activation_forward(Activation act, const Tensor<T>& x);
template <typename T>
Tensor<T> activation_backward(Activation act, const Tensor<T>& grad_out,
                              const Tensor<T>& input, const Tensor<T>& output);

// a * b where every extent of b equals a's or is 1. Output has a's shape.
template <typename T>
Tensor<T> mul_broadcast(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
struct BinaryGrads {
  Tensor<T> a;
  Tensor<T> b;  // reduced back to b's shape
};

template <typename T>
BinaryGrads<T> mul_broadcast_backward(const Tensor<T>& grad_out,
                                      const Tensor<T>& a, const Tensor<T>& b);

// Sums `grad` over the axes where `target` is 1.
template <typename T>
Tensor<T> reduce_to_shape(const Tensor<T>& grad, const Shape& target);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
// dst += src, same shape.
template <typename T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src);
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts);
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::int64_t begin,
                         std::int64_t count);
// Inverse of concat_channels for equal-width blocks.
template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x, std::int64_t parts);

// Records multiply-accumulates executed by conv2d_forward and
// fully_connected on the current thread while alive. Scopes nest; the
// innermost receives the counts.
class MacCounter {
 public:
  MacCounter();
  ~MacCounter();
  MacCounter(const MacCounter&) = delete;
  MacCounter& operator=(const MacCounter&) = delete;

  std::int64_t macs() const { return macs_; }
  static void record(std::int64_t macs);

 private:
  std::int64_t macs_ = 0;
  MacCounter* previous_ = nullptr;
};

}  // namespace mks

#endif  // MKS_OPS_HPP_

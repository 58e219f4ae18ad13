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

#ifndef MKS_LAYERS_HPP_
#define MKS_LAYERS_HPP_

// Parameterized building blocks. Each layer owns its Params; forward takes
// an optional cache that backward consumes. backward accumulates into the
// Param grads and returns the input gradient.

#include <functional>
#include <string>

#include "mks/ops.hpp"
#include "mks/rng.hpp"
#include "mks/tensor.hpp"

namespace mks {

// A named learnable tensor and its gradient accumulator (same shape).
template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Param() = default;
  Param(std::string param_name, Shape shape, T fill = T(0))
      : name(std::move(param_name)), value(shape, fill), grad(shape) {}

  bool defined() const { return !name.empty(); }
  void zero_grad() { grad.fill(T(0)); }
  void accumulate_grad(const Tensor<T>& g) { accumulate(grad, g); }
};

template <typename T>
using ParamVisitor = std::function<void(Param<T>&)>;
// Non-learnable state that is still serialized (batch-norm running stats).
template <typename T>
using BufferVisitor = std::function<void(const std::string&, Tensor<T>&)>;

// Fan-in scaled uniform: U(-1 / sqrt(fan_in), 1 / sqrt(fan_in)).
template <typename T>
void init_fan_in_uniform(Tensor<T>& weight, std::int64_t fan_in, Rng& rng);

template <typename T>
class Conv2d {
 public:
  struct Cache {
    Tensor<T> input;
  };

  Conv2d() = default;
  Conv2d(const std::string& name, const ConvSpec& spec, bool with_bias);

  void init(Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, Cache* cache) const;
  Tensor<T> backward(const Tensor<T>& grad_out, const Cache& cache);
  void visit(const ParamVisitor<T>& fn);

  const ConvSpec& spec() const { return spec_; }
  bool has_bias() const { return bias.defined(); }

  Param<T> weight;
  Param<T> bias;

 private:
  ConvSpec spec_;
};

template <typename T>
class BatchNorm2d {
 public:
  using Cache = BatchNormCache<T>;

  BatchNorm2d() = default;
  BatchNorm2d(const std::string& name, std::int64_t channels);

  // Train mode also folds batch statistics into the running stats; callers
  // must not run train-mode forwards on one layer from several threads.
  Tensor<T> forward(const Tensor<T>& x, Mode mode, Cache* cache) const;
  Tensor<T> backward(const Tensor<T>& grad_out, const Cache& cache);
  void visit(const ParamVisitor<T>& fn);
  void visit_buffers(const BufferVisitor<T>& fn);

  Param<T> gamma;
  Param<T> beta;
  mutable BatchNormStats<T> stats;

 private:
  std::string name_;
  BatchNormOptions options_;
};

template <typename T>
class Linear {
 public:
  struct Cache {
    Tensor<T> input;
  };

  Linear() = default;
  Linear(const std::string& name, std::int64_t in_features,
         std::int64_t out_features);

  void init(Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, Cache* cache) const;
  Tensor<T> backward(const Tensor<T>& grad_out, const Cache& cache);
  void visit(const ParamVisitor<T>& fn);

  Param<T> weight;
  Param<T> bias;
};

// Per-channel learnable multiplier (1, C, 1, 1) for residual branches.
template <typename T>
class ChannelScale {
 public:
  struct Cache {
    Tensor<T> input;
  };

  ChannelScale() = default;
  ChannelScale(const std::string& name, std::int64_t channels, T init);

  Tensor<T> forward(const Tensor<T>& x, Cache* cache) const;
  Tensor<T> backward(const Tensor<T>& grad_out, const Cache& cache);
  void visit(const ParamVisitor<T>& fn) { fn(scale); }

  Param<T> scale;
};

extern template class Conv2d<float>;
extern template class Conv2d<double>;
extern template class BatchNorm2d<float>;
extern template class BatchNorm2d<double>;
extern template class Linear<float>;
extern template class Linear<double>;
extern template class ChannelScale<float>;
extern template class ChannelScale<double>;

}  // namespace mks

#endif  // MKS_LAYERS_HPP_

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

#include "mks/layers.hpp"

#include <cmath>

namespace mks {

template <typename T>
void init_fan_in_uniform(Tensor<T>& weight, std::int64_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : weight.data()) v = static_cast<T>(rng.uniform(-bound, bound));
}

template void init_fan_in_uniform(Tensor<float>&, std::int64_t, Rng&);
template void init_fan_in_uniform(Tensor<double>&, std::int64_t, Rng&);

// --- Conv2d ----------------------------------------------------------------

template <typename T>
Conv2d<T>::Conv2d(const std::string& name, const ConvSpec& spec, bool with_bias)
    : spec_(spec) {
  spec_.validate();
  weight = Param<T>(name + ".weight", spec_.weight_shape());
  if (with_bias) bias = Param<T>(name + ".bias", spec_.bias_shape());
}

template <typename T>
void Conv2d<T>::init(Rng& rng) {
  init_fan_in_uniform(weight.value, spec_.fan_in(), rng);
  if (has_bias()) bias.value.fill(T(0));
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, Cache* cache) const {
  Tensor<T> y =
      conv2d_forward(x, weight.value, has_bias() ? &bias.value : nullptr, spec_);
  if (cache) cache->input = x;
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad_out, const Cache& cache) {
  ConvGrads<T> g =
      conv2d_backward(grad_out, cache.input, weight.value, spec_, has_bias());
  weight.accumulate_grad(g.weight);
  if (has_bias()) bias.accumulate_grad(g.bias);
  return std::move(g.input);
}

template <typename T>
void Conv2d<T>::visit(const ParamVisitor<T>& fn) {
  fn(weight);
  if (has_bias()) fn(bias);
}

// --- BatchNorm2d -----------------------------------------------------------

template <typename T>
BatchNorm2d<T>::BatchNorm2d(const std::string& name, std::int64_t channels)
    : gamma(name + ".gamma", {1, channels, 1, 1}, T(1)),
      beta(name + ".beta", {1, channels, 1, 1}, T(0)),
      stats(channels),
      name_(name) {}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& x, Mode mode,
                                  Cache* cache) const {
  return batchnorm_forward(x, gamma.value, beta.value, stats, mode, options_,
                           cache);
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& grad_out,
                                   const Cache& cache) {
  BatchNormGrads<T> g = batchnorm_backward(grad_out, gamma.value, cache);
  gamma.accumulate_grad(g.gamma);
  beta.accumulate_grad(g.beta);
  return std::move(g.input);
}

template <typename T>
void BatchNorm2d<T>::visit(const ParamVisitor<T>& fn) {
  fn(gamma);
  fn(beta);
}

template <typename T>
void BatchNorm2d<T>::visit_buffers(const BufferVisitor<T>& fn) {
  fn(name_ + ".running_mean", stats.mean);
  fn(name_ + ".running_var", stats.var);
}

// --- Linear ----------------------------------------------------------------

template <typename T>
Linear<T>::Linear(const std::string& name, std::int64_t in_features,
                  std::int64_t out_features)
    : weight(name + ".weight", {out_features, in_features, 1, 1}),
      bias(name + ".bias", {1, out_features, 1, 1}) {
  if (in_features < 1 || out_features < 1) {
    throw SpecError(name + ": linear layer needs positive feature counts");
  }
}

template <typename T>
void Linear<T>::init(Rng& rng) {
  init_fan_in_uniform(weight.value, weight.value.shape().c, rng);
  bias.value.fill(T(0));
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x, Cache* cache) const {
  Tensor<T> y = fully_connected(x, weight.value, &bias.value);
  if (cache) cache->input = x;
  return y;
}

template <typename T>
Tensor<T> Linear<T>::backward(const Tensor<T>& grad_out, const Cache& cache) {
  LinearGrads<T> g =
      fully_connected_backward(grad_out, cache.input, weight.value, true);
  weight.accumulate_grad(g.weight);
  bias.accumulate_grad(g.bias);
  return std::move(g.input);
}

template <typename T>
void Linear<T>::visit(const ParamVisitor<T>& fn) {
  fn(weight);
  fn(bias);
}

// --- ChannelScale ----------------------------------------------------------

template <typename T>
ChannelScale<T>::ChannelScale(const std::string& name, std::int64_t channels,
                              T init)
    : scale(name, {1, channels, 1, 1}, init) {}

template <typename T>
Tensor<T> ChannelScale<T>::forward(const Tensor<T>& x, Cache* cache) const {
  if (cache) cache->input = x;
  return mul_broadcast(x, scale.value);
}

template <typename T>
Tensor<T> ChannelScale<T>::backward(const Tensor<T>& grad_out,
                                    const Cache& cache) {
  BinaryGrads<T> g = mul_broadcast_backward(grad_out, cache.input, scale.value);
  scale.accumulate_grad(g.b);
  return std::move(g.a);
}

template class Conv2d<float>;
template class Conv2d<double>;
template class BatchNorm2d<float>;
template class BatchNorm2d<double>;
template class Linear<float>;
template class Linear<double>;
template class ChannelScale<float>;
template class ChannelScale<double>;

}  // namespace mks

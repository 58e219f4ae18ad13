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

#include "mks/loss.hpp"

#include <cmath>

namespace mks {

template <typename T>
LossResult<T> bce_loss(const Tensor<T>& logits, const Tensor<T>& target) {
  require_same_shape(logits.shape(), target.shape(), "bce_loss");
  require_nonempty(logits.shape(), "bce_loss");
  const auto n = static_cast<double>(logits.numel());
  LossResult<T> r{0.0, Tensor<T>(logits.shape())};
  for (std::int64_t i = 0; i < logits.numel(); ++i) {
    const double z = logits[i];
    const double t = target[i];
    r.value += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
    const double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z))
                            : std::exp(z) / (1.0 + std::exp(z));
    r.grad[i] = static_cast<T>((s - t) / n);
  }
  r.value /= n;
  return r;
}

template LossResult<float> bce_loss(const Tensor<float>&, const Tensor<float>&);
template LossResult<double> bce_loss(const Tensor<double>&, const Tensor<double>&);

}  // namespace mks

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

#include "mks/optim.hpp"

#include <cmath>
#include <numbers>

namespace mks {

template <typename T>
AdamW<T>::AdamW(std::vector<Param<T>*> params, const AdamWOptions& options)
    : params_(std::move(params)), options_(options) {
  for (const Param<T>* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

template <typename T>
void AdamW<T>::step() {
  ++step_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double decay = 1.0 - options_.lr * options_.weight_decay;
  const double step_size = options_.lr / bc1;
  const double sqrt_bc2 = std::sqrt(bc2);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Param<T>& p = *params_[k];
    T* w = p.value.ptr();
    const T* g = p.grad.ptr();
    T* m = m_[k].ptr();
    T* v = v_[k].ptr();
    for (std::int64_t i = 0; i < p.value.numel(); ++i) {
      const double gi = g[i];
      const double mi = b1 * m[i] + (1.0 - b1) * gi;
      const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double denom = std::sqrt(vi) / sqrt_bc2 + options_.eps;
      w[i] = static_cast<T>(w[i] * decay - step_size * mi / denom);
    }
  }
}

double cosine_lr(double base_lr, std::int64_t step, std::int64_t total_steps) {
  if (total_steps <= 0) return base_lr;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace mks

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

#ifndef MKS_OPTIM_HPP_
#define MKS_OPTIM_HPP_

#include <cstdint>
#include <vector>

#include "mks/layers.hpp"

namespace mks {

struct AdamWOptions {
  double lr = 4e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

// AdamW with decoupled weight decay and bias-corrected moments:
//   w <- w (1 - lr wd)
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   w <- w - lr (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
template <typename T>
class AdamW {
 public:
  AdamW(std::vector<Param<T>*> params, const AdamWOptions& options);

  void step();
  void set_lr(double lr) { options_.lr = lr; }
  double lr() const { return options_.lr; }
  std::int64_t step_count() const { return step_; }
  const Tensor<T>& first_moment(std::size_t i) const { return m_[i]; }
  const Tensor<T>& second_moment(std::size_t i) const { return v_[i]; }

 private:
  std::vector<Param<T>*> params_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  AdamWOptions options_;
  std::int64_t step_ = 0;
};

// lr * 0.5 (1 + cos(pi step / total)).
double cosine_lr(double base_lr, std::int64_t step, std::int64_t total_steps);

extern template class AdamW<float>;
extern template class AdamW<double>;

}  // namespace mks

#endif  // MKS_OPTIM_HPP_

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

#ifndef MKS_LOSS_HPP_
#define MKS_LOSS_HPP_

#include "mks/tensor.hpp"

namespace mks {

template <typename T>
struct LossResult {
  double value = 0.0;
  Tensor<T> grad;  // d(loss)/d(logits)
};

// Mean binary cross-entropy on logits:
//   max(z, 0) - z t + log(1 + exp(-|z|)), gradient (sigmoid(z) - t) / N.
template <typename T>
LossResult<T> bce_loss(const Tensor<T>& logits, const Tensor<T>& target);

}  // namespace mks

#endif  // MKS_LOSS_HPP_

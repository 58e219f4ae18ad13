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

#ifndef MKS_ERF_HPP_
#define MKS_ERF_HPP_

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>

#include "mks/block.hpp"
#include "mks/tensor.hpp"

namespace mks {

// Something that maps an input to an output and can return dL/dx for a
// given dL/dy.
struct ErfProbe {
  std::function<Tensor<double>(const Tensor<double>& x,
                               const std::function<Tensor<double>(const Shape&)>& seed_grad)>
      input_gradient;
};

ErfProbe probe_conv(const Conv2d<double>& conv);
// Eval-mode forward, so batch-norm layers use their running statistics.
ErfProbe probe_block(const MKSBlock<double>& block);

struct ErfResult {
  Tensor<double> map;  // (1, 1, H, W), non-negative, sums to 1
  std::int64_t support_height = 0;
  std::int64_t support_width = 0;
  double radius95 = 0.0;
  double center_y = 0.0;
  double center_x = 0.0;
};

// Averages |dy_center / dx| over `samples` standard-normal inputs of shape
// (1, channels, H, W). y_center is the channel sum of the output at the
// spatial center. Support is the bounding box of nonzero map entries;
// radius95 is the smallest Euclidean distance from the map's center of mass
// that encloses 95% of its mass.
ErfResult erf_estimate(const ErfProbe& probe, const Shape& input,
                       std::int64_t samples, std::uint64_t seed);

// 8-bit binary PGM scaled so the maximum maps to 255.
void write_erf_pgm(std::ostream& out, const ErfResult& erf);
void write_erf_csv(std::ostream& out, const ErfResult& erf);

}  // namespace mks

#endif  // MKS_ERF_HPP_

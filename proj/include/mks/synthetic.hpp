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

#ifndef MKS_SYNTHETIC_HPP_
#define MKS_SYNTHETIC_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "mks/tensor.hpp"

namespace mks {

// Small-object presence task. Images are a smooth background with clutter:
// at most one streak and one tight cluster of spots in the blob tint. 0 to 4
// isolated blobs of 2 to 4 px are the targets; a target cell contains a blob
// center.
struct SyntheticSample {
  Tensor<float> image;   // (1, 3, H, W), values in [0, 1]
  Tensor<float> target;  // (1, 1, H / cell, W / cell), values in {0, 1}
  std::int64_t blob_count = 0;
};

inline constexpr std::int64_t kDefaultCell = 16;
inline constexpr std::int64_t kMaxBlobs = 4;

// Sample i depends only on (seed, i). Throws ShapeError unless H and W are
// positive multiples of cell.
std::vector<SyntheticSample> gen_synthetic(std::uint64_t seed,
                                           std::int64_t count,
                                           std::int64_t height,
                                           std::int64_t width,
                                           std::int64_t cell = kDefaultCell);

SyntheticSample gen_sample(std::uint64_t seed, std::int64_t index,
                           std::int64_t height, std::int64_t width,
                           std::int64_t cell = kDefaultCell);

struct Batch {
  Tensor<float> images;
  Tensor<float> targets;
};

Batch make_batch(std::span<const SyntheticSample> samples,
                 std::span<const std::int64_t> indices);

}  // namespace mks

#endif  // MKS_SYNTHETIC_HPP_

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

#include <vector>

#include "gtest/gtest.h"
#include "mks/error.hpp"
#include "mks/tensor.hpp"

namespace mks {
namespace {

TEST(Tensor, DataLengthIsProductOfExtents) {
  const Tensor<float> t(Shape{2, 3, 4, 5});
  EXPECT_EQ(t.numel(), 120);
  EXPECT_EQ(t.data().size(), 120U);
  EXPECT_EQ(t.shape().plane(), 20);
  for (float v : t.data()) EXPECT_EQ(v, 0.0F);
}

TEST(Tensor, RowMajorNchwIndexing) {
  Tensor<double> t(Shape{2, 3, 4, 5});
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<double>(i);
  EXPECT_EQ(t(1, 2, 3, 4), 119.0);
  EXPECT_EQ(t(0, 1, 0, 0), 20.0);
  EXPECT_EQ(t(1, 0, 2, 1), 60.0 + 11.0);
  EXPECT_EQ(t.plane(1, 1)[0], t(1, 1, 0, 0));
}

TEST(Tensor, RejectsNegativeExtentsAndBufferMismatch) {
  EXPECT_THROW(Tensor<float>(Shape{1, -1, 2, 2}), ShapeError);
  EXPECT_THROW(Tensor<float>(Shape{1, 1, 2, 2}, std::vector<float>(3)), ShapeError);
}

TEST(Tensor, ZeroSizedTensorsAreRejectedAsOperands) {
  EXPECT_NO_THROW(require_nonempty({1, 1, 1, 1}, "x"));
  EXPECT_THROW(require_nonempty({1, 0, 2, 2}, "x"), ShapeError);
  EXPECT_THROW(require_same_shape({1, 2, 3, 4}, {1, 2, 4, 3}, "x"), ShapeError);
}

TEST(Tensor, ReshapeKeepsDataAndChecksCount) {
  Tensor<float> t(Shape{1, 2, 3, 4});
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(i);
  const Tensor<float> r = t.reshaped({2, 12, 1, 1});
  EXPECT_EQ(r.shape(), (Shape{2, 12, 1, 1}));
  for (std::int64_t i = 0; i < t.numel(); ++i) EXPECT_EQ(r[i], t[i]);
  EXPECT_THROW(t.reshaped({1, 1, 5, 5}), ShapeError);
}

TEST(Tensor, CastAndDtype) {
  Tensor<double> d(Shape{1, 1, 1, 3});
  d[0] = 0.5;
  d[1] = -2.0;
  d[2] = 3.25;
  const Tensor<float> f = d.cast<float>();
  EXPECT_EQ(f.shape(), d.shape());
  EXPECT_EQ(f[2], 3.25F);
  EXPECT_EQ(Tensor<float>::dtype(), DType::kFloat32);
  EXPECT_EQ(Tensor<double>::dtype(), DType::kFloat64);
  EXPECT_EQ(dtype_size(DType::kFloat64), 8U);
}

TEST(Tensor, FillAndShapeString) {
  Tensor<float> t(Shape{1, 2, 2, 2});
  t.fill(1.5F);
  for (float v : t.data()) EXPECT_EQ(v, 1.5F);
  EXPECT_NE(t.shape().str().find('2'), std::string::npos);
}

}  // namespace
}  // namespace mks

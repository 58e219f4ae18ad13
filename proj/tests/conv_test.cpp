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

#include <cmath>

#include "gtest/gtest.h"
#include "mks/error.hpp"
#include "mks/gradcheck.hpp"
#include "mks/ops.hpp"
#include "mks/rng.hpp"
#include "oracles.hpp"

namespace mks {
namespace {

using oracle::fill_normal;
using oracle::max_rel_diff;
using oracle::naive_conv;

struct Instance {
  ConvSpec spec;
  Tensor<double> x, w, b;
};

// B <= 2, C <= 4, H, W <= 7, k <= 5, d <= 3, groups in {1, C}, output >= 1.
Instance random_instance(Rng& rng, bool depthwise) {
  for (;;) {
    ConvSpec s;
    const auto c = static_cast<std::int64_t>(1 + rng.below(4));
    s.in_channels = c;
    s.groups = depthwise ? c : 1;
    s.out_channels = depthwise ? c : static_cast<std::int64_t>(1 + rng.below(4));
    s.kernel_h = static_cast<std::int64_t>(1 + rng.below(5));
    s.kernel_w = static_cast<std::int64_t>(1 + rng.below(5));
    s.dilation = static_cast<std::int64_t>(1 + rng.below(3));
    s.stride = static_cast<std::int64_t>(1 + rng.below(2));
    s.padding = static_cast<std::int64_t>(rng.below(4));
    const Shape xs{static_cast<std::int64_t>(1 + rng.below(2)), c,
                   static_cast<std::int64_t>(1 + rng.below(7)),
                   static_cast<std::int64_t>(1 + rng.below(7))};
    const std::int64_t span_h = s.dilation * (s.kernel_h - 1) + 1;
    const std::int64_t span_w = s.dilation * (s.kernel_w - 1) + 1;
    if (xs.h + 2 * s.padding < span_h || xs.w + 2 * s.padding < span_w) continue;
    Instance in{s, Tensor<double>(xs), Tensor<double>(s.weight_shape()),
                Tensor<double>(s.bias_shape())};
    fill_normal(in.x, rng);
    fill_normal(in.w, rng);
    fill_normal(in.b, rng);
    return in;
  }
}

TEST(Conv, MatchesNaiveOracleOnRandomDenseInstances) {
  Rng rng(101);
  for (int i = 0; i < 300; ++i) {
    Instance in = random_instance(rng, false);
    const Tensor<double> got = conv2d_forward(in.x, in.w, &in.b, in.spec);
    const Tensor<double> want = naive_conv(in.x, in.w, &in.b, in.spec);
    ASSERT_EQ(got.shape(), want.shape());
    EXPECT_LE(max_rel_diff(got, want), 1e-12) << "instance " << i;
  }
}

TEST(Conv, MatchesNaiveOracleOnRandomDepthwiseInstances) {
  Rng rng(202);
  for (int i = 0; i < 300; ++i) {
    Instance in = random_instance(rng, true);
    const Tensor<double> got = conv2d_forward(in.x, in.w, nullptr, in.spec);
    const Tensor<double> want = naive_conv(in.x, in.w, nullptr, in.spec);
    ASSERT_EQ(got.shape(), want.shape());
    EXPECT_LE(max_rel_diff(got, want), 1e-12) << "instance " << i;
  }
}

TEST(Conv, DilatedExampleMatchesOracle) {
  Rng rng(7);
  const ConvSpec s = ConvSpec::square(2, 3, 3, 1, 2, 2);
  Tensor<double> x(Shape{1, 2, 5, 5});
  Tensor<double> w(s.weight_shape());
  fill_normal(x, rng);
  fill_normal(w, rng);
  EXPECT_LE(max_rel_diff(conv2d_forward(x, w, nullptr, s), naive_conv(x, w, nullptr, s)),
            1e-12);
}

TEST(Conv, UnitDepthwiseKernelIsIdentity) {
  Rng rng(3);
  Tensor<double> x(Shape{2, 3, 4, 5});
  fill_normal(x, rng);
  const ConvSpec s = ConvSpec::square(3, 3, 1, 1, 1, 0, 3);
  const Tensor<double> w(s.weight_shape(), 1.0);
  const Tensor<double> y = conv2d_forward(x, w, nullptr, s);
  for (std::int64_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);

  Tensor<double> g(x.shape());
  fill_normal(g, rng);
  const ConvGrads<double> grads = conv2d_backward(g, x, w, s, false);
  for (std::int64_t i = 0; i < g.numel(); ++i) EXPECT_EQ(grads.input[i], g[i]);
}

TEST(Conv, ScheduleEntryPreservesSpatialSize) {
  // k = 7, d = 2, p = 6 on 1x4x32x32.
  const ConvSpec s = ConvSpec::depthwise(4, 7, 2, 6);
  EXPECT_EQ(s.output_shape({1, 4, 32, 32}), (Shape{1, 4, 32, 32}));
  Tensor<float> x(Shape{1, 4, 32, 32}, 1.0F);
  Tensor<float> w(s.weight_shape(), 1.0F);
  EXPECT_EQ(conv2d_forward(x, w, nullptr, s).shape(), (Shape{1, 4, 32, 32}));
}

TEST(Conv, OutputSizeFormula) {
  const ConvSpec s = ConvSpec::square(1, 1, 3, 2, 1, 1);
  // (9 + 2 - 2 - 1) / 2 + 1 = 5
  EXPECT_EQ(s.output_shape({1, 1, 9, 9}), (Shape{1, 1, 5, 5}));
  const ConvSpec big = ConvSpec::square(1, 1, 5, 1, 3, 0);
  EXPECT_THROW(big.output_shape({1, 1, 8, 8}), SpecError);
}

TEST(Conv, RejectsInvalidOperands) {
  const ConvSpec s = ConvSpec::square(2, 4, 3, 1, 1, 1);
  Tensor<double> w(s.weight_shape());
  EXPECT_THROW(conv2d_forward(Tensor<double>(Shape{1, 3, 5, 5}), w, nullptr, s),
               ShapeError);
  EXPECT_THROW(conv2d_forward(Tensor<double>(Shape{1, 2, 5, 5}),
                              Tensor<double>(Shape{4, 2, 2, 3}), nullptr, s),
               ShapeError);
  EXPECT_THROW(conv2d_forward(Tensor<double>(Shape{0, 2, 5, 5}), w, nullptr, s),
               ShapeError);
  ConvSpec bad = s;
  bad.groups = 3;
  EXPECT_THROW(bad.validate(), SpecError);
  bad = s;
  bad.stride = 0;
  EXPECT_THROW(bad.validate(), SpecError);
}

TEST(Conv, ZeroGradOutGivesZeroGradients) {
  Rng rng(9);
  const ConvSpec s = ConvSpec::square(2, 3, 3, 2, 1, 1);
  Tensor<double> x(Shape{2, 2, 6, 6});
  Tensor<double> w(s.weight_shape());
  fill_normal(x, rng);
  fill_normal(w, rng);
  const ConvGrads<double> g =
      conv2d_backward(Tensor<double>(s.output_shape(x.shape())), x, w, s, true);
  for (const Tensor<double>* t : {&g.input, &g.weight, &g.bias}) {
    for (double v : t->data()) EXPECT_EQ(v, 0.0);
  }
}

// Backward equals the transpose of the forward: <g, conv(x)> is linear in x
// and w, so its gradient is exact to rounding.
TEST(Conv, BackwardIsAdjointOfForward) {
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    Instance in = random_instance(rng, i % 2 == 0);
    const Tensor<double> y = conv2d_forward(in.x, in.w, nullptr, in.spec);
    Tensor<double> g(y.shape());
    fill_normal(g, rng);
    const ConvGrads<double> grads = conv2d_backward(g, in.x, in.w, in.spec, false);
    double lhs = 0.0;
    double rhs_x = 0.0;
    double rhs_w = 0.0;
    for (std::int64_t j = 0; j < y.numel(); ++j) lhs += g[j] * y[j];
    for (std::int64_t j = 0; j < in.x.numel(); ++j) rhs_x += grads.input[j] * in.x[j];
    for (std::int64_t j = 0; j < in.w.numel(); ++j) rhs_w += grads.weight[j] * in.w[j];
    const double scale = std::max(1.0, std::abs(lhs));
    EXPECT_NEAR(lhs, rhs_x, 1e-10 * scale);
    EXPECT_NEAR(lhs, rhs_w, 1e-10 * scale);
  }
}

TEST(Conv, FloatPathAgreesWithDoubleOracle) {
  Rng rng(13);
  for (int i = 0; i < 60; ++i) {
    Instance in = random_instance(rng, i % 3 == 0);
    const Tensor<double> want = naive_conv(in.x, in.w, &in.b, in.spec);
    const Tensor<float> xb = in.x.cast<float>();
    const Tensor<float> wb = in.w.cast<float>();
    const Tensor<float> bb = in.b.cast<float>();
    const Tensor<double> got = conv2d_forward(xb, wb, &bb, in.spec).cast<double>();
    EXPECT_LE(max_rel_diff(got, want), 1e-4);
  }
}

TEST(Conv, LargePlanesUseFastPathsCorrectly) {
  // Sizes large enough to exercise vector tiles and remainders.
  Rng rng(17);
  const ConvSpec specs[] = {
      ConvSpec::pointwise(13, 11),
      ConvSpec::depthwise(5, 7, 2, 6),
      ConvSpec::depthwise(5, 5, 1, 2),
      ConvSpec::square(3, 8, 4, 4, 1, 0),
      ConvSpec::square(6, 9, 3, 2, 1, 1),
  };
  for (const ConvSpec& s : specs) {
    Tensor<double> x(Shape{2, s.in_channels, 19, 21});
    Tensor<double> w(s.weight_shape());
    Tensor<double> b(s.bias_shape());
    fill_normal(x, rng);
    fill_normal(w, rng);
    fill_normal(b, rng);
    EXPECT_LE(max_rel_diff(conv2d_forward(x, w, &b, s), naive_conv(x, w, &b, s)), 1e-12);
  }
}

TEST(Conv, GradientsMatchFiniteDifferences) {
  Rng rng(19);
  const ConvSpec specs[] = {
      ConvSpec::square(2, 3, 3, 1, 1, 1),
      ConvSpec::square(2, 2, 3, 2, 2, 2),
      ConvSpec::depthwise(3, 5, 2, 4),
      ConvSpec::pointwise(3, 2),
  };
  for (const ConvSpec& s : specs) {
    Tensor<double> x(Shape{1, s.in_channels, 6, 6});
    Tensor<double> w(s.weight_shape());
    Tensor<double> b(s.bias_shape());
    fill_normal(x, rng);
    fill_normal(w, rng);
    fill_normal(b, rng);
    GradCheckCase c;
    c.inputs = {{"x", &x}, {"weight", &w}, {"bias", &b}};
    c.forward = [&] { return conv2d_forward(x, w, &b, s); };
    c.backward = [&](const Tensor<double>& g) {
      ConvGrads<double> r = conv2d_backward(g, x, w, s, true);
      return std::vector<Tensor<double>>{r.input, r.weight, r.bias};
    };
    const GradCheckReport rep = gradcheck("conv", c);
    EXPECT_TRUE(rep.passed) << rep.max_rel_error;
    EXPECT_LT(rep.max_rel_error, 1e-6);
  }
}

}  // namespace
}  // namespace mks

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
#include <vector>

#include "gtest/gtest.h"
#include "mks/error.hpp"
#include "mks/gradcheck.hpp"
#include "mks/ops.hpp"
#include "mks/rng.hpp"
#include "oracles.hpp"

namespace mks {
namespace {

using oracle::fill_normal;

GradCheckReport check_unary(const char* name, Tensor<double>& x,
                            std::function<Tensor<double>()> fwd,
                            std::function<Tensor<double>(const Tensor<double>&)> bwd) {
  GradCheckCase c;
  c.inputs = {{"x", &x}};
  c.forward = std::move(fwd);
  c.backward = [bwd](const Tensor<double>& g) { return std::vector<Tensor<double>>{bwd(g)}; };
  return gradcheck(name, c);
}

TEST(BatchNorm, ConstantChannelNormalizesToZero) {
  Tensor<double> x(Shape{2, 3, 4, 4}, 2.5);
  Tensor<double> gamma(Shape{1, 3, 1, 1}, 1.0);
  Tensor<double> beta(Shape{1, 3, 1, 1}, 0.0);
  BatchNormStats<double> stats(3);
  const Tensor<double> y =
      batchnorm_forward(x, gamma, beta, stats, Mode::kTrain, {}, nullptr);
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(BatchNorm, TrainModeStandardizesPerChannel) {
  Rng rng(1);
  Tensor<double> x(Shape{4, 3, 8, 8});
  fill_normal(x, rng, 3.0);
  for (std::int64_t i = 0; i < x.numel(); ++i) x[i] += 5.0;
  Tensor<double> gamma(Shape{1, 3, 1, 1}, 1.0);
  Tensor<double> beta(Shape{1, 3, 1, 1}, 0.0);
  BatchNormStats<double> stats(3);
  BatchNormCache<double> cache;
  batchnorm_forward(x, gamma, beta, stats, Mode::kTrain, {}, &cache);
  for (std::int64_t c = 0; c < 3; ++c) {
    double mean = 0.0;
    double sq = 0.0;
    std::int64_t n = 0;
    for (std::int64_t b = 0; b < 4; ++b) {
      for (std::int64_t i = 0; i < 64; ++i) {
        const double v = cache.normalized.plane(b, c)[i];
        mean += v;
        sq += v * v;
        ++n;
      }
    }
    mean /= static_cast<double>(n);
    const double var = sq / static_cast<double>(n) - mean * mean;
    EXPECT_LT(std::abs(mean), 1e-6);
    EXPECT_NEAR(var, 1.0, 1e-4);
  }
}

TEST(BatchNorm, RunningStatsFollowMomentumAndDriveEvalMode) {
  Tensor<double> x(Shape{2, 1, 1, 2});
  x[0] = 1.0;
  x[1] = 3.0;
  x[2] = 5.0;
  x[3] = 7.0;  // mean 4, biased var 5, unbiased var 20/3
  Tensor<double> gamma(Shape{1, 1, 1, 1}, 2.0);
  Tensor<double> beta(Shape{1, 1, 1, 1}, 1.0);
  BatchNormStats<double> stats(1);
  batchnorm_forward(x, gamma, beta, stats, Mode::kTrain, {}, nullptr);
  EXPECT_NEAR(stats.mean[0], 0.4, 1e-15);
  const double var = stats.var[0];
  EXPECT_TRUE(std::abs(var - (0.9 + 0.1 * 5.0)) < 1e-12 ||
              std::abs(var - (0.9 + 0.1 * 20.0 / 3.0)) < 1e-12);
  const Tensor<double> y = batchnorm_forward(x, gamma, beta, stats, Mode::kEval, {}, nullptr);
  EXPECT_NEAR(y[0], 2.0 * (1.0 - 0.4) / std::sqrt(var + 1e-5) + 1.0, 1e-12);
}

TEST(BatchNorm, RejectsChannelMismatch) {
  Tensor<double> x(Shape{1, 3, 2, 2});
  Tensor<double> g(Shape{1, 2, 1, 1}, 1.0);
  BatchNormStats<double> stats(2);
  EXPECT_THROW(batchnorm_forward(x, g, g, stats, Mode::kTrain, {}, nullptr), ShapeError);
}

TEST(BatchNorm, GradientsMatchFiniteDifferences) {
  Rng rng(2);
  for (Mode mode : {Mode::kTrain, Mode::kEval}) {
    Tensor<double> x(Shape{3, 2, 3, 3});
    Tensor<double> gamma(Shape{1, 2, 1, 1});
    Tensor<double> beta(Shape{1, 2, 1, 1});
    fill_normal(x, rng);
    fill_normal(gamma, rng);
    fill_normal(beta, rng);
    BatchNormStats<double> stats(2);
    stats.mean[0] = 0.3;
    stats.var[1] = 2.0;
    BatchNormCache<double> cache;
    GradCheckCase c;
    c.inputs = {{"x", &x}, {"gamma", &gamma}, {"beta", &beta}};
    c.forward = [&] {
      BatchNormStats<double> s = stats;  // keep running stats fixed
      return batchnorm_forward(x, gamma, beta, s, mode, {}, &cache);
    };
    c.backward = [&](const Tensor<double>& g) {
      BatchNormGrads<double> r = batchnorm_backward(g, gamma, cache);
      return std::vector<Tensor<double>>{r.input, r.gamma, r.beta};
    };
    const GradCheckReport rep = gradcheck("batchnorm", c);
    EXPECT_LT(rep.max_rel_error, 1e-6);
  }
}

TEST(Pooling, ConstantAndHandExample) {
  Tensor<double> x(Shape{1, 2, 2, 2}, 7.0);
  x(0, 0, 0, 0) = 1.0;
  x(0, 0, 0, 1) = 2.0;
  x(0, 0, 1, 0) = 3.0;
  x(0, 0, 1, 1) = 4.0;
  std::vector<std::int64_t> arg;
  const Tensor<double> avg = global_avg_pool(x);
  const Tensor<double> mx = global_max_pool(x, &arg);
  EXPECT_EQ(avg.shape(), (Shape{1, 2, 1, 1}));
  EXPECT_EQ(avg[0], 2.5);
  EXPECT_EQ(mx[0], 4.0);
  EXPECT_EQ(avg[1], 7.0);
  EXPECT_EQ(mx[1], 7.0);
}

TEST(Pooling, MaxRoutesGradientToFirstArgmax) {
  Tensor<double> x(Shape{1, 1, 2, 2}, 1.0);
  x[1] = 5.0;
  x[3] = 5.0;  // tie: first occurrence wins
  std::vector<std::int64_t> arg;
  global_max_pool(x, &arg);
  const Tensor<double> g = global_max_pool_backward(Tensor<double>(Shape{1, 1, 1, 1}, 2.0),
                                                    arg, x.shape());
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[1], 2.0);
  EXPECT_EQ(g[2], 0.0);
  EXPECT_EQ(g[3], 0.0);
}

TEST(Pooling, GradientsMatchFiniteDifferences) {
  Rng rng(3);
  Tensor<double> x(Shape{2, 3, 3, 4});
  fill_normal(x, rng);  // continuous values: no ties
  std::vector<std::int64_t> arg;
  EXPECT_LT(check_unary("avg", x, [&] { return global_avg_pool(x); },
                        [&](const Tensor<double>& g) {
                          return global_avg_pool_backward(g, x.shape());
                        }).max_rel_error,
            1e-6);
  EXPECT_LT(check_unary("max", x, [&] { return global_max_pool(x, &arg); },
                        [&](const Tensor<double>& g) {
                          return global_max_pool_backward(g, arg, x.shape());
                        }).max_rel_error,
            1e-6);
}

TEST(ChannelStats, SingleChannelIsIdentityAndHandExample) {
  Rng rng(4);
  Tensor<double> one(Shape{2, 1, 3, 3});
  fill_normal(one, rng);
  std::vector<std::int64_t> arg;
  const Tensor<double> m1 = channel_mean(one);
  const Tensor<double> x1 = channel_max(one, &arg);
  for (std::int64_t i = 0; i < one.numel(); ++i) {
    EXPECT_EQ(m1[i], one[i]);
    EXPECT_EQ(x1[i], one[i]);
  }
  Tensor<double> two(Shape{1, 2, 1, 1});
  two[0] = 1.0;
  two[1] = 3.0;
  EXPECT_EQ(channel_mean(two)[0], 2.0);
  EXPECT_EQ(channel_max(two, &arg)[0], 3.0);
  const std::vector<Tensor<double>> stats = {channel_mean(two), channel_max(two, &arg)};
  EXPECT_EQ(concat_channels<double>(stats).shape(), (Shape{1, 2, 1, 1}));
}

TEST(ChannelStats, GradientsMatchFiniteDifferences) {
  Rng rng(5);
  Tensor<double> x(Shape{2, 4, 3, 3});
  fill_normal(x, rng);
  std::vector<std::int64_t> arg;
  EXPECT_LT(check_unary("mean", x, [&] { return channel_mean(x); },
                        [&](const Tensor<double>& g) {
                          return channel_mean_backward(g, x.shape());
                        }).max_rel_error,
            1e-6);
  EXPECT_LT(check_unary("max", x, [&] { return channel_max(x, &arg); },
                        [&](const Tensor<double>& g) {
                          return channel_max_backward(g, arg, x.shape());
                        }).max_rel_error,
            1e-6);
}

TEST(FullyConnected, AffineMapAndGradients) {
  Tensor<double> x(Shape{1, 2, 1, 1});
  x[0] = 1.0;
  x[1] = -2.0;
  Tensor<double> w(Shape{3, 2, 1, 1});
  for (std::int64_t i = 0; i < 6; ++i) w[i] = static_cast<double>(i + 1);
  Tensor<double> b(Shape{1, 3, 1, 1}, 0.5);
  const Tensor<double> y = fully_connected(x, w, &b);
  EXPECT_EQ(y.shape(), (Shape{1, 3, 1, 1}));
  EXPECT_EQ(y[0], 1.0 - 4.0 + 0.5);
  EXPECT_EQ(y[2], 5.0 - 12.0 + 0.5);

  Rng rng(6);
  Tensor<double> xs(Shape{3, 4, 1, 1});
  Tensor<double> ws(Shape{2, 4, 1, 1});
  Tensor<double> bs(Shape{1, 2, 1, 1});
  fill_normal(xs, rng);
  fill_normal(ws, rng);
  fill_normal(bs, rng);
  GradCheckCase c;
  c.inputs = {{"x", &xs}, {"weight", &ws}, {"bias", &bs}};
  c.forward = [&] { return fully_connected(xs, ws, &bs); };
  c.backward = [&](const Tensor<double>& g) {
    LinearGrads<double> r = fully_connected_backward(g, xs, ws, true);
    return std::vector<Tensor<double>>{r.input, r.weight, r.bias};
  };
  EXPECT_LT(gradcheck("fc", c).max_rel_error, 1e-6);
}

TEST(Activations, SigmoidAndReluRanges) {
  Tensor<double> x(Shape{1, 1, 1, 5});
  x[0] = 0.0;
  x[1] = 40.0;
  x[2] = -40.0;
  x[3] = 2.0;
  x[4] = -1e-3;
  const Tensor<double> s = sigmoid(x);
  EXPECT_EQ(s[0], 0.5);
  for (double v : s.data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  const Tensor<double> r = relu(x);
  for (double v : r.data()) EXPECT_GE(v, 0.0);
  EXPECT_EQ(r[3], 2.0);
  EXPECT_EQ(r[4], 0.0);
  EXPECT_EQ(parse_activation(activation_name(Activation::kSigmoid)), Activation::kSigmoid);
  EXPECT_THROW(parse_activation("swish"), Error);
}

TEST(Activations, GradientsMatchFiniteDifferences) {
  Rng rng(7);
  Tensor<double> x(Shape{2, 3, 2, 2});
  fill_normal(x, rng);
  for (double& v : x.data()) v += v >= 0 ? 0.1 : -0.1;  // away from the ReLU kink
  EXPECT_LT(check_unary("sigmoid", x, [&] { return sigmoid(x); },
                        [&](const Tensor<double>& g) { return sigmoid_backward(g, sigmoid(x)); })
                .max_rel_error,
            1e-6);
  EXPECT_LT(check_unary("relu", x, [&] { return relu(x); },
                        [&](const Tensor<double>& g) { return relu_backward(g, x); })
                .max_rel_error,
            1e-6);
}

TEST(Broadcast, OnesGateIsIdentity) {
  Rng rng(8);
  Tensor<double> x(Shape{2, 3, 4, 4});
  fill_normal(x, rng);
  const Tensor<double> y = mul_broadcast(x, Tensor<double>(Shape{2, 3, 1, 1}, 1.0));
  for (std::int64_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);
  EXPECT_THROW(mul_broadcast(x, Tensor<double>(Shape{2, 2, 1, 1})), ShapeError);
}

TEST(Broadcast, GradientsMatchFiniteDifferences) {
  Rng rng(9);
  for (const Shape bs : {Shape{2, 1, 3, 3}, Shape{2, 4, 1, 1}, Shape{2, 4, 3, 3}}) {
    Tensor<double> a(Shape{2, 4, 3, 3});
    Tensor<double> b(bs);
    fill_normal(a, rng);
    fill_normal(b, rng);
    GradCheckCase c;
    c.inputs = {{"a", &a}, {"b", &b}};
    c.forward = [&] { return mul_broadcast(a, b); };
    c.backward = [&](const Tensor<double>& g) {
      BinaryGrads<double> r = mul_broadcast_backward(g, a, b);
      return std::vector<Tensor<double>>{r.a, r.b};
    };
    EXPECT_LT(gradcheck("mul", c).max_rel_error, 1e-6) << bs.str();
  }
}

TEST(Concat, PreservesBlockOrderAndSplitsBack) {
  Rng rng(10);
  std::vector<Tensor<double>> parts;
  for (int i = 0; i < 3; ++i) {
    parts.emplace_back(Shape{2, 2, 3, 3});
    fill_normal(parts.back(), rng);
  }
  const Tensor<double> joined = concat_channels<double>(parts);
  EXPECT_EQ(joined.shape(), (Shape{2, 6, 3, 3}));
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(joined(1, 2 * i + 1, 2, 0), parts[static_cast<std::size_t>(i)](1, 1, 2, 0));
  }
  const std::vector<Tensor<double>> back = split_channels(joined, 3);
  ASSERT_EQ(back.size(), 3U);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::int64_t j = 0; j < parts[i].numel(); ++j) EXPECT_EQ(back[i][j], parts[i][j]);
  }
  const Tensor<double> mid = slice_channels(joined, 2, 2);
  for (std::int64_t j = 0; j < mid.numel(); ++j) EXPECT_EQ(mid[j], parts[1][j]);
}

TEST(Elementwise, AddScaleAccumulateAndReduce) {
  Tensor<double> a(Shape{2, 2, 1, 2}, 1.0);
  Tensor<double> b(Shape{2, 2, 1, 2}, 2.0);
  EXPECT_EQ(add(a, b)[3], 3.0);
  EXPECT_EQ(scale(b, 0.25)[0], 0.5);
  accumulate(a, b);
  EXPECT_EQ(a[7], 3.0);
  const Tensor<double> r = reduce_to_shape(a, {1, 2, 1, 1});
  EXPECT_EQ(r.shape(), (Shape{1, 2, 1, 1}));
  EXPECT_EQ(r[0], 12.0);
}

TEST(GradCheck, LinearOpIsExact) {
  Rng rng(11);
  Tensor<double> x(Shape{1, 2, 3, 3});
  fill_normal(x, rng);
  const GradCheckReport rep = check_unary(
      "twice", x, [&] { return scale(x, 2.0); },
      [&](const Tensor<double>& g) { return scale(g, 2.0); });
  EXPECT_TRUE(rep.passed);
  EXPECT_LT(rep.max_rel_error, 1e-9);
  EXPECT_EQ(rep.elements_checked, 18);
}

TEST(GradCheck, DetectsWrongBackward) {
  Rng rng(12);
  Tensor<double> x(Shape{1, 1, 2, 2});
  fill_normal(x, rng);
  const GradCheckReport rep = check_unary(
      "wrong", x, [&] { return scale(x, 2.0); },
      [&](const Tensor<double>& g) { return scale(g, 2.1); });
  EXPECT_FALSE(rep.passed);
  EXPECT_GT(rep.max_rel_error, 1e-2);
}

}  // namespace
}  // namespace mks

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
#include <numbers>

#include "gtest/gtest.h"
#include "mks/gradcheck.hpp"
#include "mks/loss.hpp"
#include "mks/optim.hpp"
#include "oracles.hpp"

namespace mks {
namespace {

TEST(AdamW, MatchesScalarReference) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    AdamWOptions o;
    o.lr = rng.uniform(1e-4, 1e-2);
    o.beta1 = rng.uniform(0.5, 0.95);
    o.beta2 = rng.uniform(0.9, 0.9999);
    o.weight_decay = rng.uniform(0.0, 0.1);
    Param<double> p("w", {1, 3, 2, 2});
    oracle::fill_normal(p.value, rng);
    std::vector<oracle::ScalarAdamW> ref(
        static_cast<std::size_t>(p.value.numel()),
        oracle::ScalarAdamW{o.lr, o.beta1, o.beta2, o.eps, o.weight_decay});
    std::vector<double> w(p.value.data().begin(), p.value.data().end());
    AdamW<double> opt({&p}, o);
    for (int step = 0; step < 25; ++step) {
      oracle::fill_normal(p.grad, rng);
      for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = ref[i].step(w[i], p.grad[static_cast<std::int64_t>(i)]);
      }
      opt.step();
      for (std::size_t i = 0; i < w.size(); ++i) {
        EXPECT_NEAR(p.value[static_cast<std::int64_t>(i)], w[i], 1e-12);
      }
    }
    EXPECT_EQ(opt.step_count(), 25);
  }
}

TEST(AdamW, SingleUnitStep) {
  Param<double> p("w", {1, 1, 1, 1}, 1.0);
  p.grad.fill(1.0);
  AdamWOptions o;
  o.weight_decay = 0.0;
  AdamW<double> opt({&p}, o);
  opt.step();
  EXPECT_NEAR(p.value[0], 1.0 - 4e-4 / (1.0 + 1e-8), 1e-15);
}

TEST(AdamW, ZeroGradientWithoutDecayIsNoOp) {
  Param<double> p("w", {1, 2, 1, 1}, 0.75);
  AdamWOptions o;
  o.weight_decay = 0.0;
  AdamW<double> opt({&p}, o);
  for (int i = 0; i < 3; ++i) opt.step();
  for (double v : p.value.data()) EXPECT_EQ(v, 0.75);
}

TEST(AdamW, DecayOnlyShrinksWeights) {
  Param<double> p("w", {1, 2, 1, 1}, 2.0);
  AdamWOptions o;
  AdamW<double> opt({&p}, o);
  opt.step();
  for (double v : p.value.data()) EXPECT_DOUBLE_EQ(v, 2.0 * (1.0 - o.lr * o.weight_decay));
}

TEST(AdamW, MomentShapesMatchParams) {
  Param<float> a("a", {2, 3, 1, 1});
  Param<float> b("b", {1, 4, 5, 5});
  AdamW<float> opt({&a, &b}, AdamWOptions{});
  EXPECT_EQ(opt.first_moment(0).shape(), a.value.shape());
  EXPECT_EQ(opt.second_moment(1).shape(), b.value.shape());
}

TEST(CosineLr, EndpointsAndMidpoint) {
  EXPECT_DOUBLE_EQ(cosine_lr(4e-4, 0, 100), 4e-4);
  EXPECT_NEAR(cosine_lr(4e-4, 50, 100), 2e-4, 1e-18);
  EXPECT_NEAR(cosine_lr(4e-4, 100, 100), 0.0, 1e-18);
  EXPECT_NEAR(cosine_lr(1.0, 25, 100), 0.5 * (1.0 + std::cos(std::numbers::pi / 4)), 1e-15);
}

TEST(BceLoss, ZeroLogitsGiveLogTwo) {
  const Tensor<double> z(Shape{2, 1, 3, 3});
  Tensor<double> t(Shape{2, 1, 3, 3});
  t[0] = 1.0;
  t[5] = 1.0;
  EXPECT_NEAR(bce_loss(z, t).value, std::log(2.0), 1e-15);
}

TEST(BceLoss, LargeMarginApproachesZero) {
  Tensor<double> z(Shape{1, 1, 2, 2}, -50.0);
  Tensor<double> t(Shape{1, 1, 2, 2});
  z[1] = 50.0;
  t[1] = 1.0;
  const LossResult<double> r = bce_loss(z, t);
  EXPECT_LT(r.value, 1e-20);
  EXPECT_TRUE(std::isfinite(r.value));
  Tensor<double> huge(Shape{1, 1, 1, 1}, 1e4);
  EXPECT_TRUE(std::isfinite(bce_loss(huge, Tensor<double>(Shape{1, 1, 1, 1})).value));
}

TEST(BceLoss, GradientMatchesFiniteDifferences) {
  Rng rng(2);
  Tensor<double> z(Shape{2, 1, 3, 4});
  oracle::fill_normal(z, rng, 2.0);
  Tensor<double> t(z.shape());
  for (auto& v : t.data()) v = rng.uniform() < 0.3 ? 1.0 : 0.0;
  GradCheckCase c;
  c.inputs = {{"logits", &z}};
  c.forward = [&] { return Tensor<double>(Shape{1, 1, 1, 1}, bce_loss(z, t).value); };
  c.backward = [&](const Tensor<double>& g) {
    return std::vector<Tensor<double>>{scale(bce_loss(z, t).grad, g[0])};
  };
  const GradCheckReport rep = gradcheck("bce", c);
  EXPECT_TRUE(rep.passed) << rep.max_rel_error;
  EXPECT_LT(rep.max_rel_error, 1e-6);
}

}  // namespace
}  // namespace mks

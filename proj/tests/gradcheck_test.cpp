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

#include <set>
#include <string>

#include "gtest/gtest.h"
#include "mks/error.hpp"
#include "mks/gradcheck_suite.hpp"
#include "mks/ops.hpp"

namespace mks {
namespace {

TEST(GradCheck, LinearMapIsExact) {
  Tensor<double> x(Shape{1, 2, 3, 3});
  for (std::int64_t i = 0; i < x.numel(); ++i) x[i] = 0.1 * static_cast<double>(i) - 0.7;
  GradCheckCase c;
  c.inputs = {{"x", &x}};
  c.forward = [&] { return scale(x, 2.0); };
  c.backward = [](const Tensor<double>& g) { return std::vector<Tensor<double>>{scale(g, 2.0)}; };
  const GradCheckReport r = gradcheck("double", c);
  EXPECT_TRUE(r.passed);
  EXPECT_LT(r.max_rel_error, 1e-9);
  EXPECT_EQ(r.elements_checked, x.numel());
}

TEST(GradCheck, DetectsWrongGradient) {
  Tensor<double> x(Shape{1, 1, 2, 2}, 0.5);
  GradCheckCase c;
  c.inputs = {{"x", &x}};
  c.forward = [&] { return scale(x, 2.0); };
  c.backward = [](const Tensor<double>& g) { return std::vector<Tensor<double>>{scale(g, 2.1)}; };
  EXPECT_FALSE(gradcheck("wrong", c).passed);
}

TEST(GradCheck, EveryRegisteredUnitPasses) {
  const auto reports = run_gradcheck("all");
  EXPECT_EQ(reports.size(), gradcheck_units().size());
  for (const GradCheckReport& r : reports) {
    EXPECT_TRUE(r.passed) << r.unit << " " << r.max_rel_error << " at " << r.worst_input
                          << "[" << r.worst_index << "]";
    EXPECT_LT(r.max_rel_error, 1e-5) << r.unit;
    EXPECT_GT(r.elements_checked, 0) << r.unit;
  }
}

TEST(GradCheck, RequiredUnitsAreRegistered) {
  std::set<std::string> names;
  for (const GradCheckUnit& u : gradcheck_units()) names.insert(u.name);
  for (const char* want :
       {"conv2d", "batchnorm", "global_avg_pool", "global_max_pool", "channel_mean",
        "channel_max", "fully_connected", "sigmoid", "relu", "mul_broadcast",
        "concat_channels", "bce_loss", "sa_extract", "sa_attention", "sa_fuse",
        "sa_forward", "ca_forward", "mks_block_forward", "patch_embed", "backbone_head"}) {
    EXPECT_TRUE(names.count(want)) << want;
  }
}

TEST(GradCheck, PerturbedBackwardFailsEveryUnit) {
  for (const GradCheckReport& r : run_gradcheck("all", true)) {
    EXPECT_FALSE(r.passed) << r.unit;
  }
}

TEST(GradCheck, ScopeSelection) {
  const auto one = run_gradcheck("sa_forward");
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].unit, "sa_forward");
  std::size_t ops = 0;
  std::size_t modules = 0;
  for (const GradCheckUnit& u : gradcheck_units()) (u.is_module ? modules : ops) += 1;
  EXPECT_EQ(run_gradcheck("ops").size(), ops);
  EXPECT_EQ(run_gradcheck("modules").size(), modules);
  EXPECT_THROW(run_gradcheck("no_such_unit"), ConfigError);
}

}  // namespace
}  // namespace mks

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

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gtest/gtest.h"
#include "mks/error.hpp"
#include "mks/metrics.hpp"
#include "oracles.hpp"

namespace mks {
namespace {

std::vector<ScoredPrediction> preds(std::initializer_list<double> scores,
                                    std::initializer_list<int> labels) {
  std::vector<ScoredPrediction> out;
  auto l = labels.begin();
  for (double s : scores) out.push_back({s, *l++ == 1});
  return out;
}

// Scores drawn from a small grid so ties are common.
std::vector<ScoredPrediction> random_predictions(Rng& rng, std::int64_t* positives) {
  const auto n = static_cast<std::size_t>(1 + rng.below(40));
  std::vector<ScoredPrediction> p(n);
  std::int64_t pos = 0;
  for (auto& q : p) {
    q.score = static_cast<double>(rng.below(12)) / 11.0;
    q.is_positive = rng.uniform() < 0.4;
    pos += q.is_positive;
  }
  *positives = pos + static_cast<std::int64_t>(rng.below(3));
  if (*positives == 0) *positives = 1;
  return p;
}

TEST(Metrics, HandExampleCurve) {
  const auto p = preds({0.9, 0.8, 0.7}, {1, 0, 1});
  const auto curve = pr_curve(p, 2);
  ASSERT_EQ(curve.size(), 3u);
  EXPECT_DOUBLE_EQ(curve[0].recall, 0.5);
  EXPECT_DOUBLE_EQ(curve[0].precision, 1.0);
  EXPECT_DOUBLE_EQ(curve[1].recall, 0.5);
  EXPECT_DOUBLE_EQ(curve[1].precision, 0.5);
  EXPECT_DOUBLE_EQ(curve[2].recall, 1.0);
  EXPECT_DOUBLE_EQ(curve[2].precision, 2.0 / 3.0);
  EXPECT_NEAR(average_precision(curve).ap, 0.5 + 0.5 * 2.0 / 3.0, 1e-15);
}

TEST(Metrics, PerfectRankingHasUnitAP) {
  const auto p = preds({0.9, 0.8, 0.3, 0.2}, {1, 1, 0, 0});
  EXPECT_DOUBLE_EQ(average_precision(pr_curve(p, 2)).ap, 1.0);
  EXPECT_DOUBLE_EQ(average_precision(pr_curve(preds({0.4}, {1}), 1)).ap, 1.0);
}

TEST(Metrics, AllPositiveHasUnitPrecision) {
  const auto curve = pr_curve(preds({0.1, 0.5, 0.3}, {1, 1, 1}), 3);
  for (const PRPoint& q : curve) EXPECT_EQ(q.precision, 1.0);
  EXPECT_EQ(curve.back().recall, 1.0);
}

TEST(Metrics, TiesFollowInputOrder) {
  // Equal scores: the earlier negative ranks first.
  const auto curve = pr_curve(preds({0.5, 0.5}, {0, 1}), 1);
  EXPECT_EQ(curve[0].recall, 0.0);
  EXPECT_EQ(curve[1].recall, 1.0);
  EXPECT_DOUBLE_EQ(average_precision(curve).ap, 0.5);
}

TEST(Metrics, RejectsZeroPositives) {
  EXPECT_THROW(pr_curve(preds({0.5}, {0}), 0), Error);
  EXPECT_THROW(mean_ap({}), Error);
}

TEST(Metrics, MatchesThresholdOracleOnRandomInstances) {
  Rng rng(42);
  for (int i = 0; i < 1000; ++i) {
    std::int64_t positives = 0;
    const auto p = random_predictions(rng, &positives);
    const auto got = pr_curve(p, positives);
    const auto want = oracle::threshold_pr(p, positives);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t k = 0; k < got.size(); ++k) {
      EXPECT_EQ(got[k].recall, want[k].recall);
      EXPECT_EQ(got[k].precision, want[k].precision);
    }
    EXPECT_NEAR(average_precision(got).ap, oracle::threshold_ap(want), 1e-12);
  }
}

TEST(Metrics, APInUnitIntervalAndUnitIffPerfect) {
  Rng rng(43);
  for (int i = 0; i < 500; ++i) {
    std::int64_t positives = 0;
    auto p = random_predictions(rng, &positives);
    std::int64_t labelled = 0;
    for (const auto& q : p) labelled += q.is_positive;
    if (labelled == 0) continue;
    const double ap = average_precision(pr_curve(p, labelled)).ap;
    EXPECT_GE(ap, 0.0);
    EXPECT_LE(ap, 1.0);
    // Perfect under the stable rule: stable-sorted, every positive first.
    std::vector<std::size_t> order(p.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return p[a].score > p[b].score; });
    bool perfect = true;
    for (std::size_t k = 0; k < order.size(); ++k) {
      perfect = perfect && (p[order[k]].is_positive == (static_cast<std::int64_t>(k) < labelled));
    }
    EXPECT_EQ(ap == 1.0, perfect);
  }
}

TEST(Metrics, InvariantUnderMonotoneTransform) {
  Rng rng(44);
  for (int i = 0; i < 200; ++i) {
    std::int64_t positives = 0;
    auto p = random_predictions(rng, &positives);
    const double ap = average_precision(pr_curve(p, positives)).ap;
    for (auto& q : p) q.score = std::exp(3.0 * q.score) - 7.0;
    EXPECT_EQ(average_precision(pr_curve(p, positives)).ap, ap);
  }
}

TEST(Metrics, EnvelopeDominatesRawStepArea) {
  Rng rng(45);
  for (int i = 0; i < 200; ++i) {
    std::int64_t positives = 0;
    const auto p = random_predictions(rng, &positives);
    const auto curve = pr_curve(p, positives);
    double raw = 0.0;
    double prev = 0.0;
    for (const PRPoint& q : curve) {
      raw += (q.recall - prev) * q.precision;
      prev = q.recall;
    }
    EXPECT_GE(average_precision(curve).ap, raw - 1e-15);
  }
}

TEST(Metrics, MeanAP) {
  const std::vector<APResult> two = {{0, 1.0}, {1, 0.5}};
  EXPECT_DOUBLE_EQ(mean_ap(two), 0.75);
  const std::vector<APResult> one = {{0, 0.3}};
  EXPECT_DOUBLE_EQ(mean_ap(one), 0.3);
  const std::vector<APResult> swapped = {{1, 0.5}, {0, 1.0}};
  EXPECT_EQ(mean_ap(swapped), mean_ap(two));
}

TEST(Metrics, ReadsFixtureText) {
  std::istringstream with_header("# comment\npositives=4\n0.9 1\n\n0.8 0\n0.7 1\n");
  const APFixture a = read_ap_fixture(with_header);
  EXPECT_EQ(a.total_positives, 4);
  EXPECT_EQ(a.predictions.size(), 3u);
  std::istringstream bare("0.9 1\n0.8 0\n0.7 1\n");
  const APFixture b = read_ap_fixture(bare);
  EXPECT_EQ(b.total_positives, 2);
  EXPECT_NEAR(average_precision(pr_curve(b.predictions, b.total_positives)).ap,
              0.833333, 5e-7);
  std::istringstream bad("0.9 2\n");
  EXPECT_THROW(read_ap_fixture(bad), FormatError);
}

}  // namespace
}  // namespace mks

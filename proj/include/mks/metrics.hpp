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

#ifndef MKS_METRICS_HPP_
#define MKS_METRICS_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace mks {

struct ScoredPrediction {
  double score = 0.0;
  bool is_positive = false;
};

struct PRPoint {
  double recall = 0.0;
  double precision = 0.0;
};

struct APResult {
  std::int64_t class_id = 0;
  double ap = 0.0;
};

// Ranks by score, descending; equal scores keep input order. One point per
// prediction from cumulative true/false positive counts.
std::vector<PRPoint> pr_curve(std::span<const ScoredPrediction> predictions,
                              std::int64_t total_positives);

// Area under the monotone precision envelope: precision at each point is
// replaced by the maximum precision at any later point, then summed over
// recall increments.
APResult average_precision(std::span<const PRPoint> curve,
                           std::int64_t class_id = 0);

double mean_ap(std::span<const APResult> results);

// Text fixture: one "score label" pair per line (label 0 or 1) and an
// optional "positives=<n>" header giving the ground-truth positive count,
// which exceeds the label-1 lines when some positives were never predicted.
// Without the header the positives are the label-1 lines. Blank lines and
// lines starting with '#' are skipped.
struct APFixture {
  std::vector<ScoredPrediction> predictions;
  std::int64_t total_positives = 0;
};

APFixture read_ap_fixture(std::istream& in);
APFixture load_ap_fixture(const std::filesystem::path& path);

}  // namespace mks

#endif  // MKS_METRICS_HPP_

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

#include "mks/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "mks/error.hpp"

namespace mks {

std::vector<PRPoint> pr_curve(std::span<const ScoredPrediction> predictions,
                              std::int64_t total_positives) {
  if (total_positives < 1) {
    throw Error("pr_curve: total_positives must be >= 1 (AP undefined)");
  }
  std::vector<std::size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (const auto& p : predictions) {
    if (!std::isfinite(p.score)) throw Error("pr_curve: non-finite score");
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return predictions[a].score > predictions[b].score;
  });

  std::vector<PRPoint> curve;
  curve.reserve(order.size());
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  for (std::size_t idx : order) {
    if (predictions[idx].is_positive) {
      ++tp;
    } else {
      ++fp;
    }
    curve.push_back({static_cast<double>(tp) / static_cast<double>(total_positives),
                     static_cast<double>(tp) / static_cast<double>(tp + fp)});
  }
  return curve;
}

APResult average_precision(std::span<const PRPoint> curve, std::int64_t class_id) {
  if (curve.empty()) throw Error("average_precision: empty curve");
  std::vector<double> envelope(curve.size());
  double running = 0.0;
  for (std::size_t i = curve.size(); i-- > 0;) {
    running = std::max(running, curve[i].precision);
    envelope[i] = running;
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    ap += (curve[i].recall - prev_recall) * envelope[i];
    prev_recall = curve[i].recall;
  }
  return {class_id, std::clamp(ap, 0.0, 1.0)};
}

double mean_ap(std::span<const APResult> results) {
  if (results.empty()) throw Error("mean_ap: no classes");
  double total = 0.0;
  for (const auto& r : results) total += r.ap;
  return total / static_cast<double>(results.size());
}

APFixture read_ap_fixture(std::istream& in) {
  APFixture fixture;
  bool have_header = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const std::string where = "line " + std::to_string(line_no);
    if (line.compare(first, 10, "positives=") == 0) {
      if (have_header) throw FormatError(where + ": duplicate positives header");
      try {
        std::size_t used = 0;
        const std::string value = line.substr(first + 10);
        fixture.total_positives = std::stoll(value, &used);
        if (value.find_first_not_of(" \t\r", used) != std::string::npos) {
          throw FormatError(where + ": trailing characters after positives");
        }
      } catch (const std::logic_error&) {
        throw FormatError(where + ": bad positives header");
      }
      have_header = true;
      continue;
    }
    std::istringstream fields(line);
    double score = 0.0;
    int label = -1;
    std::string extra;
    if (!(fields >> score >> label) || (fields >> extra) ||
        (label != 0 && label != 1)) {
      throw FormatError(where + ": expected '<score> <0|1>'");
    }
    fixture.predictions.push_back({score, label == 1});
  }
  if (!have_header) {
    for (const auto& p : fixture.predictions) fixture.total_positives += p.is_positive;
  }
  return fixture;
}

APFixture load_ap_fixture(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_ap_fixture(in);
}

}  // namespace mks

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

#ifndef MKS_BENCH_HPP_
#define MKS_BENCH_HPP_

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "mks/backbone.hpp"
#include "mks/flops.hpp"

namespace mks {

struct SpanComparison {
  std::string name;
  ConvSpec spec;
  std::int64_t params = 0;
  std::int64_t flops = 0;  // per sample
  double median_ms = 0.0;
};

struct BenchReport {
  std::vector<LayerCost> layers;
  std::int64_t total_params = 0;
  std::int64_t total_flops = 0;
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::int64_t batch = 1;
  double forward_median_ms = 0.0;  // eval-mode forward of the whole model
  // Depthwise k=7, d=2 against a dense conv of the same 13x13 span, at the
  // first stage width and resolution.
  std::vector<SpanComparison> span_rows;
};

SpanComparison span_row(const std::string& name, const ConvSpec& spec,
                        std::int64_t height, std::int64_t width);

// Timings are medians over `repeats` runs after one warm-up.
BenchReport run_bench(const BackboneConfig& config, std::int64_t height,
                      std::int64_t width, std::int64_t batch,
                      std::uint64_t seed, int repeats = 5);

void write_bench_table(std::ostream& out, const BenchReport& report);

}  // namespace mks

#endif  // MKS_BENCH_HPP_

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

#include "mks/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>

#include "mks/error.hpp"

namespace mks {
namespace {

double median_ms(const std::function<void()>& fn, int repeats) {
  fn();
  std::vector<double> t;
  for (int r = 0; r < repeats; ++r) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    t.push_back(std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - start)
                    .count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

Tensor<float> random_input(const Shape& s, Rng& rng) {
  Tensor<float> x(s);
  for (float& v : x.data()) v = static_cast<float>(rng.uniform());
  return x;
}

}  // namespace

SpanComparison span_row(const std::string& name, const ConvSpec& spec,
                        std::int64_t height, std::int64_t width) {
  return {name, spec, conv_params(spec, false), conv_flops(spec, height, width), 0.0};
}

BenchReport run_bench(const BackboneConfig& config, std::int64_t height,
                      std::int64_t width, std::int64_t batch,
                      std::uint64_t seed, int repeats) {
  if (repeats < 1) throw Error("run_bench: repeats must be >= 1");
  if (batch < 1) throw Error("run_bench: batch must be >= 1");
  config.validate();
  config.check_input_size(height, width);

  BenchReport r;
  r.layers = layer_costs(config, height, width);
  r.total_params = count_params(config);
  r.total_flops = count_flops(config, height, width);
  r.height = height;
  r.width = width;
  r.batch = batch;

  Rng rng(seed);
  const Model<float> model(config, rng.fork(1).next_u64());
  Rng input_rng = rng.fork(2);
  const Tensor<float> x = random_input({batch, config.in_channels, height, width}, input_rng);
  r.forward_median_ms = median_ms([&] { model.forward(x, Mode::kEval, nullptr); }, repeats);

  const std::int64_t c = config.patch.channels;
  const std::int64_t h = height / config.patch.stride;
  const std::int64_t w = width / config.patch.stride;
  r.span_rows = {span_row("depthwise k7 d2", ConvSpec::depthwise(c, 7, 2, 6), h, w),
                 span_row("dense 13x13", ConvSpec::square(c, c, 13, 1, 1, 6), h, w)};
  for (SpanComparison& row : r.span_rows) {
    Rng wr = rng.fork(3);
    const Tensor<float> weight = random_input(row.spec.weight_shape(), wr);
    const Tensor<float> in = random_input({batch, c, h, w}, wr);
    row.median_ms = median_ms(
        [&] { conv2d_forward<float>(in, weight, nullptr, row.spec); }, repeats);
  }
  return r;
}

void write_bench_table(std::ostream& out, const BenchReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-36s %12s %14s\n", "layer", "params", "flops");
  out << buf;
  for (const LayerCost& l : r.layers) {
    std::snprintf(buf, sizeof buf, "%-36s %12lld %14lld\n", l.name.c_str(),
                  static_cast<long long>(l.params), static_cast<long long>(l.flops));
    out << buf;
  }
  std::snprintf(buf, sizeof buf,
                "%-36s %12lld %14lld  forward %.3f ms (median, batch %lld, %lldx%lld)\n",
                "total", static_cast<long long>(r.total_params),
                static_cast<long long>(r.total_flops), r.forward_median_ms,
                static_cast<long long>(r.batch), static_cast<long long>(r.height),
                static_cast<long long>(r.width));
  out << buf << '\n';
  for (const SpanComparison& s : r.span_rows) {
    std::snprintf(buf, sizeof buf, "%-36s %12lld %14lld  %.3f ms\n", s.name.c_str(),
                  static_cast<long long>(s.params), static_cast<long long>(s.flops),
                  s.median_ms);
    out << buf;
  }
}

}  // namespace mks

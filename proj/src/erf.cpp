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

#include "mks/erf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>
#include <vector>

#include "mks/error.hpp"
#include "mks/rng.hpp"

namespace mks {
namespace {

using SeedGrad = std::function<Tensor<double>(const Shape&)>;

Tensor<double> center_seed(const Shape& out) {
  Tensor<double> g(out);
  for (std::int64_t c = 0; c < out.c; ++c) g(0, c, out.h / 2, out.w / 2) = 1.0;
  return g;
}

}  // namespace

ErfProbe probe_conv(const Conv2d<double>& conv) {
  return {[net = conv](const Tensor<double>& x, const SeedGrad& seed_grad) mutable {
    typename Conv2d<double>::Cache cache;
    const Tensor<double> y = net.forward(x, &cache);
    return net.backward(seed_grad(y.shape()), cache);
  }};
}

ErfProbe probe_block(const MKSBlock<double>& block) {
  return {[net = block](const Tensor<double>& x, const SeedGrad& seed_grad) mutable {
    typename MKSBlock<double>::Cache cache;
    const Tensor<double> y = net.forward(x, Mode::kEval, &cache);
    return net.backward(seed_grad(y.shape()), cache);
  }};
}

ErfResult erf_estimate(const ErfProbe& probe, const Shape& input,
                       std::int64_t samples, std::uint64_t seed) {
  if (samples < 1) throw Error("erf_estimate: samples must be >= 1");
  if (input.n != 1 || !input.positive()) {
    throw ShapeError("erf_estimate: input must be (1, C, H, W), got " + input.str());
  }
  ErfResult r;
  r.map = Tensor<double>(Shape{1, 1, input.h, input.w});
  Rng rng(seed);
  for (std::int64_t s = 0; s < samples; ++s) {
    Rng sample_rng = rng.fork(static_cast<std::uint64_t>(s));
    Tensor<double> x(input);
    for (double& v : x.data()) v = sample_rng.normal();
    const Tensor<double> g = probe.input_gradient(x, center_seed);
    require_same_shape(g.shape(), input, "erf input gradient");
    for (std::int64_t c = 0; c < input.c; ++c) {
      const double* gp = g.plane(0, c);
      for (std::int64_t i = 0; i < input.plane(); ++i) r.map[i] += std::abs(gp[i]);
    }
  }

  double total = 0.0;
  for (double v : r.map.data()) total += v;
  if (!(total > 0)) throw Error("erf_estimate: gradient map is identically zero");
  std::int64_t y0 = input.h, y1 = -1, x0 = input.w, x1 = -1;
  double cy = 0.0, cx = 0.0;
  for (std::int64_t y = 0; y < input.h; ++y) {
    for (std::int64_t x = 0; x < input.w; ++x) {
      double& v = r.map(0, 0, y, x);
      v /= total;
      if (v == 0.0) continue;
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      cy += v * static_cast<double>(y);
      cx += v * static_cast<double>(x);
    }
  }
  r.support_height = y1 - y0 + 1;
  r.support_width = x1 - x0 + 1;
  r.center_y = cy;
  r.center_x = cx;

  std::vector<std::pair<double, double>> by_distance;  // (distance, mass)
  for (std::int64_t y = 0; y < input.h; ++y) {
    for (std::int64_t x = 0; x < input.w; ++x) {
      const double v = r.map(0, 0, y, x);
      if (v > 0) by_distance.emplace_back(std::hypot(y - cy, x - cx), v);
    }
  }
  std::sort(by_distance.begin(), by_distance.end());
  double mass = 0.0;
  for (const auto& [d, v] : by_distance) {
    mass += v;
    r.radius95 = d;
    if (mass >= 0.95) break;
  }
  return r;
}

void write_erf_pgm(std::ostream& out, const ErfResult& erf) {
  const Shape s = erf.map.shape();
  double peak = 0.0;
  for (double v : erf.map.data()) peak = std::max(peak, v);
  out << "P5\n" << s.w << ' ' << s.h << "\n255\n";
  for (double v : erf.map.data()) {
    const long q = peak > 0 ? std::lround(255.0 * v / peak) : 0;
    out.put(static_cast<char>(static_cast<unsigned char>(q)));
  }
}

void write_erf_csv(std::ostream& out, const ErfResult& erf) {
  const Shape s = erf.map.shape();
  char buf[64];
  for (std::int64_t y = 0; y < s.h; ++y) {
    for (std::int64_t x = 0; x < s.w; ++x) {
      std::snprintf(buf, sizeof buf, "%.17g", erf.map(0, 0, y, x));
      out << (x ? "," : "") << buf;
    }
    out << '\n';
  }
}

}  // namespace mks

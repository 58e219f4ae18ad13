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

#include "mks/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "mks/error.hpp"
#include "mks/rng.hpp"

namespace mks {
namespace {

using Color = std::array<double, 3>;

constexpr Color kBlobTint = {0.95, 0.85, 0.55};
constexpr Color kStreakTint = {0.55, 0.75, 0.95};
constexpr double kBackgroundLo = 0.15;
constexpr double kBackgroundHi = 0.55;
constexpr double kPixelNoise = 0.03;
constexpr std::int64_t kNoiseGrid = 16;
constexpr std::uint64_t kMaxStreaks = 1;
constexpr double kBlobAmpLo = 0.35;
constexpr double kBlobAmpHi = 0.6;

struct Canvas {
  std::int64_t h, w;
  std::vector<double> px;  // 3 planes

  double& at(std::int64_t c, std::int64_t y, std::int64_t x) {
    return px[static_cast<std::size_t>((c * h + y) * w + x)];
  }
};

void smooth_background(Canvas& cv, Rng& rng) {
  const std::int64_t gh = cv.h / kNoiseGrid + 2;
  const std::int64_t gw = cv.w / kNoiseGrid + 2;
  for (std::int64_t c = 0; c < 3; ++c) {
    std::vector<double> grid(static_cast<std::size_t>(gh * gw));
    for (double& g : grid) g = rng.uniform(kBackgroundLo, kBackgroundHi);
    for (std::int64_t y = 0; y < cv.h; ++y) {
      const double fy = static_cast<double>(y) / kNoiseGrid;
      const auto y0 = static_cast<std::int64_t>(fy);
      const double ty = fy - static_cast<double>(y0);
      for (std::int64_t x = 0; x < cv.w; ++x) {
        const double fx = static_cast<double>(x) / kNoiseGrid;
        const auto x0 = static_cast<std::int64_t>(fx);
        const double tx = fx - static_cast<double>(x0);
        auto g = [&](std::int64_t i, std::int64_t j) {
          return grid[static_cast<std::size_t>(i * gw + j)];
        };
        const double top = g(y0, x0) * (1 - tx) + g(y0, x0 + 1) * tx;
        const double bot = g(y0 + 1, x0) * (1 - tx) + g(y0 + 1, x0 + 1) * tx;
        cv.at(c, y, x) = top * (1 - ty) + bot * ty;
      }
    }
  }
}

// Disc of the given diameter centered at (cy, cx) in continuous pixel units.
void stamp_disc(Canvas& cv, double cy, double cx, double diameter,
                double amplitude, const Color& tint) {
  const double r2 = diameter * diameter / 4.0;
  const auto y_lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(cy - diameter));
  const auto y_hi = std::min<std::int64_t>(cv.h - 1, static_cast<std::int64_t>(cy + diameter));
  const auto x_lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(cx - diameter));
  const auto x_hi = std::min<std::int64_t>(cv.w - 1, static_cast<std::int64_t>(cx + diameter));
  for (std::int64_t y = y_lo; y <= y_hi; ++y) {
    for (std::int64_t x = x_lo; x <= x_hi; ++x) {
      const double dy = static_cast<double>(y) + 0.5 - cy;
      const double dx = static_cast<double>(x) + 0.5 - cx;
      if (dy * dy + dx * dx > r2) continue;
      for (std::int64_t c = 0; c < 3; ++c) cv.at(c, y, x) += amplitude * tint[c];
    }
  }
}

void stamp_streak(Canvas& cv, Rng& rng) {
  const double y = rng.uniform(0.0, static_cast<double>(cv.h));
  const double x = rng.uniform(0.0, static_cast<double>(cv.w));
  const double angle = rng.uniform(0.0, 3.141592653589793);
  const double length = rng.uniform(8.0, 20.0);
  const double amp = rng.uniform(0.25, 0.45);
  const auto steps = static_cast<std::int64_t>(length * 2);
  for (std::int64_t s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) / 2.0;
    const auto py = static_cast<std::int64_t>(y + t * std::sin(angle));
    const auto px = static_cast<std::int64_t>(x + t * std::cos(angle));
    if (py < 0 || py >= cv.h || px < 0 || px >= cv.w) continue;
    for (std::int64_t c = 0; c < 3; ++c) {
      double& v = cv.at(c, py, px);
      v = std::max(v, v * 0.5 + amp * kStreakTint[c]);
    }
  }
}

// A tight group of blob-like spots; a spot inside a group is not a target.
void stamp_cluster(Canvas& cv, Rng& rng, const Color& tint) {
  const double cy = rng.uniform(0.0, static_cast<double>(cv.h));
  const double cx = rng.uniform(0.0, static_cast<double>(cv.w));
  const auto spots = 3 + static_cast<std::int64_t>(rng.below(3));
  for (std::int64_t s = 0; s < spots; ++s) {
    const double oy = cy + rng.uniform(-5.0, 5.0);
    const double ox = cx + rng.uniform(-5.0, 5.0);
    const double d = rng.uniform(2.0, 4.0);
    stamp_disc(cv, oy, ox, d, rng.uniform(kBlobAmpLo, kBlobAmpHi), tint);
  }
}

}  // namespace

SyntheticSample gen_sample(std::uint64_t seed, std::int64_t index,
                           std::int64_t height, std::int64_t width,
                           std::int64_t cell) {
  if (cell < 1 || height < cell || width < cell || height % cell != 0 ||
      width % cell != 0) {
    throw ShapeError("synthetic image " + std::to_string(height) + "x" +
                     std::to_string(width) + " is not a multiple of cell " +
                     std::to_string(cell));
  }
  Rng rng = Rng(seed).fork(static_cast<std::uint64_t>(index));
  Rng bg_rng = rng.fork(1);
  Rng clutter_rng = rng.fork(2);
  Rng blob_rng = rng.fork(3);
  Rng noise_rng = rng.fork(4);

  Canvas cv{height, width, std::vector<double>(static_cast<std::size_t>(3 * height * width))};
  smooth_background(cv, bg_rng);

  // At most one streak and exactly one cluster of blob-tinted spots.
  const auto streaks = static_cast<std::int64_t>(clutter_rng.below(kMaxStreaks + 1));
  for (std::int64_t s = 0; s < streaks; ++s) stamp_streak(cv, clutter_rng);
  stamp_cluster(cv, clutter_rng, kBlobTint);

  SyntheticSample sample;
  sample.target = Tensor<float>(Shape{1, 1, height / cell, width / cell});
  sample.blob_count = static_cast<std::int64_t>(blob_rng.below(kMaxBlobs + 1));
  for (std::int64_t b = 0; b < sample.blob_count; ++b) {
    const double cy = blob_rng.uniform(0.0, static_cast<double>(height));
    const double cx = blob_rng.uniform(0.0, static_cast<double>(width));
    const double d = blob_rng.uniform(2.0, 4.0);
    stamp_disc(cv, cy, cx, d, blob_rng.uniform(kBlobAmpLo, kBlobAmpHi), kBlobTint);
    sample.target(0, 0, static_cast<std::int64_t>(cy) / cell,
                  static_cast<std::int64_t>(cx) / cell) = 1.0F;
  }

  sample.image = Tensor<float>(Shape{1, 3, height, width});
  for (std::size_t i = 0; i < cv.px.size(); ++i) {
    const double v = cv.px[i] + kPixelNoise * noise_rng.normal();
    sample.image[static_cast<std::int64_t>(i)] =
        static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return sample;
}

std::vector<SyntheticSample> gen_synthetic(std::uint64_t seed,
                                           std::int64_t count,
                                           std::int64_t height,
                                           std::int64_t width,
                                           std::int64_t cell) {
  if (count < 0) throw Error("gen_synthetic: negative count");
  std::vector<SyntheticSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    out.push_back(gen_sample(seed, i, height, width, cell));
  }
  return out;
}

Batch make_batch(std::span<const SyntheticSample> samples,
                 std::span<const std::int64_t> indices) {
  if (indices.empty()) throw Error("make_batch: empty batch");
  const Shape is = samples[static_cast<std::size_t>(indices[0])].image.shape();
  const Shape ts = samples[static_cast<std::size_t>(indices[0])].target.shape();
  const auto b = static_cast<std::int64_t>(indices.size());
  Batch batch{Tensor<float>(Shape{b, is.c, is.h, is.w}),
              Tensor<float>(Shape{b, ts.c, ts.h, ts.w})};
  for (std::int64_t k = 0; k < b; ++k) {
    const auto at = static_cast<std::size_t>(indices[static_cast<std::size_t>(k)]);
    const SyntheticSample& s = samples[at];
    require_same_shape(s.image.shape(), is, "make_batch");
    std::copy(s.image.data().begin(), s.image.data().end(),
              batch.images.ptr() + k * is.numel());
    std::copy(s.target.data().begin(), s.target.data().end(),
              batch.targets.ptr() + k * ts.numel());
  }
  return batch;
}

}  // namespace mks

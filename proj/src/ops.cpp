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

#include "mks/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

namespace mks {
namespace {

using i64 = std::int64_t;

thread_local MacCounter* g_active_counter = nullptr;

std::string dims(i64 a, i64 b, i64 c, i64 d) {
  return Shape{a, b, c, d}.str();
}

template <typename T>
inline void axpy(T alpha, const T* x, T* y, i64 n) {
  for (i64 i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
inline T dot(const T* a, const T* b, i64 n) {
  T acc[8] = {};
  i64 i = 0;
  for (; i + 8 <= n; i += 8) {
    for (int j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  }
  for (; i < n; ++i) acc[0] += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
         ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

template <typename T>
inline T sum(const T* a, i64 n) {
  T acc[8] = {};
  i64 i = 0;
  for (; i + 8 <= n; i += 8) {
    for (int j = 0; j < 8; ++j) acc[j] += a[i + j];
  }
  for (; i < n; ++i) acc[0] += a[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
         ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

// Output columns [lo, hi) whose input column ow*stride + offset is in [0, W).
struct Range {
  i64 lo;
  i64 hi;
};

inline Range valid_range(i64 offset, i64 stride, i64 in_extent, i64 out_extent) {
  // offset + o*stride >= 0  ->  o >= ceil(-offset / stride)
  i64 lo = 0;
  if (offset < 0) lo = (-offset + stride - 1) / stride;
  // offset + o*stride <= in_extent - 1
  i64 hi = out_extent;
  const i64 last = in_extent - 1 - offset;
  if (last < 0) {
    hi = 0;
  } else {
    hi = std::min(out_extent, last / stride + 1);
  }
  return {lo, std::max(lo, hi)};
}

void check_conv_operands(const Shape& x, const Shape& w, const Shape* bias,
                         const ConvSpec& spec) {
  spec.validate();
  require_nonempty(x, "conv2d input");
  if (x.c != spec.in_channels) {
    throw ShapeError("conv2d: input has " + std::to_string(x.c) +
                     " channels, spec expects " +
                     std::to_string(spec.in_channels));
  }
  if (!(w == spec.weight_shape())) {
    throw ShapeError("conv2d: weight shape " + w.str() + " expected " +
                     spec.weight_shape().str());
  }
  if (bias != nullptr && !(*bias == spec.bias_shape())) {
    throw ShapeError("conv2d: bias shape " + bias->str() + " expected " +
                     spec.bias_shape().str());
  }
}

// Direct convolution, one kernel tap at a time. For each tap and output
// row, fn receives the input row offset and the valid output columns; the
// input column of output column ow is ow * stride + col_offset.
template <typename Fn>
void for_each_tap_row(const ConvSpec& spec, const Shape& xs, const Shape& os,
                      Fn&& fn) {
  const i64 s = spec.stride, d = spec.dilation, p = spec.padding;
  for (i64 kh = 0; kh < spec.kernel_h; ++kh) {
    const Range rows = valid_range(kh * d - p, s, xs.h, os.h);
    for (i64 kw = 0; kw < spec.kernel_w; ++kw) {
      const Range cols = valid_range(kw * d - p, s, xs.w, os.w);
      if (cols.lo >= cols.hi) continue;
      for (i64 oh = rows.lo; oh < rows.hi; ++oh) {
        fn(kh, kw, oh, (oh * s + kh * d - p) * xs.w, kw * d - p, cols);
      }
    }
  }
}

template <typename T>
struct VecOf;
template <>
struct VecOf<float> {
  typedef float type __attribute__((vector_size(32)));
};
template <>
struct VecOf<double> {
  typedef double type __attribute__((vector_size(32)));
};
template <typename T>
using Vec = typename VecOf<T>::type;

template <typename T>
inline Vec<T> load(const T* p) {
  Vec<T> v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

template <typename T>
inline void store_add(T* p, Vec<T> v) {
  Vec<T> cur;
  std::memcpy(&cur, p, sizeof v);
  cur += v;
  std::memcpy(p, &cur, sizeof v);
}

// C (m x n) += A (m x k) B (k x n); B and C row-major, A(i, q) at
// a[i * a_row + q * a_col]. Register tiles of 4 rows x 2 vectors.
template <typename T>
void gemm(i64 m, i64 n, i64 k, const T* a, i64 a_row, i64 a_col,
          const T* b, T* c) {
  constexpr i64 kLanes = static_cast<i64>(sizeof(Vec<T>) / sizeof(T));
  constexpr i64 kCols = 2 * kLanes;
  const i64 n_full = n - n % kCols;
  i64 i = 0;
  for (; i + 4 <= m; i += 4) {
    const T* a0 = a + i * a_row;
    for (i64 j = 0; j < n_full; j += kCols) {
      Vec<T> c00{}, c01{}, c10{}, c11{}, c20{}, c21{}, c30{}, c31{};
      const T* ap = a0;
      const T* br = b + j;
      for (i64 q = 0; q < k; ++q, ap += a_col, br += n) {
        const Vec<T> b0 = load(br);
        const Vec<T> b1 = load(br + kLanes);
        const T x0 = ap[0], x1 = ap[a_row], x2 = ap[2 * a_row],
                x3 = ap[3 * a_row];
        c00 += x0 * b0; c01 += x0 * b1;
        c10 += x1 * b0; c11 += x1 * b1;
        c20 += x2 * b0; c21 += x2 * b1;
        c30 += x3 * b0; c31 += x3 * b1;
      }
      T* cr = c + i * n + j;
      store_add(cr, c00); store_add(cr + kLanes, c01); cr += n;
      store_add(cr, c10); store_add(cr + kLanes, c11); cr += n;
      store_add(cr, c20); store_add(cr + kLanes, c21); cr += n;
      store_add(cr, c30); store_add(cr + kLanes, c31);
    }
    for (i64 r = 0; r < 4; ++r) {
      for (i64 q = 0; q < k; ++q) {
        axpy(a0[r * a_row + q * a_col], b + q * n + n_full,
             c + (i + r) * n + n_full, n - n_full);
      }
    }
  }
  for (; i < m; ++i) {
    for (i64 q = 0; q < k; ++q) {
      axpy(a[i * a_row + q * a_col], b + q * n, c + i * n, n);
    }
  }
}

bool is_pointwise(const ConvSpec& s) {
  return s.kernel_h == 1 && s.kernel_w == 1 && s.stride == 1 &&
         s.padding == 0 && s.groups == 1;
}

bool is_depthwise_unit_stride(const ConvSpec& s) {
  return s.groups == s.in_channels && s.in_channels == s.out_channels &&
         s.stride == 1;
}

// Stride-1 depthwise convolution. Each plane is copied into a zero-padded
// buffer of width pw and the output is computed in the same row pitch, so
// every tap is a single axpy over os.h * pw elements; the columns past os.w
// are discarded.
struct DepthwiseGeometry {
  i64 pw;      // padded row pitch
  i64 span;    // os.h * pw
  i64 buffer;  // padded plane plus read overrun of the last tap
  i64 taps;

  DepthwiseGeometry(const ConvSpec& spec, const Shape& xs, const Shape& os)
      : pw(xs.w + 2 * spec.padding),
        span(os.h * pw),
        buffer((xs.h + 2 * spec.padding) * pw +
               (spec.kernel_w - 1) * spec.dilation),
        taps(spec.kernel_h * spec.kernel_w) {}

  i64 tap_offset(const ConvSpec& spec, i64 t) const {
    return (t / spec.kernel_w) * spec.dilation * pw +
           (t % spec.kernel_w) * spec.dilation;
  }
};

template <typename T>
void pad_plane(const T* src, const Shape& xs, i64 p, i64 pw, T* dst) {
  for (i64 h = 0; h < xs.h; ++h) {
    std::copy_n(src + h * xs.w, xs.w, dst + (h + p) * pw + p);
  }
}

template <typename T>
void depthwise_forward(const Tensor<T>& x, const T* w, const Tensor<T>* bias,
                       const ConvSpec& spec, Tensor<T>& out) {
  const Shape xs = x.shape();
  const Shape os = out.shape();
  const DepthwiseGeometry geo(spec, xs, os);
  std::vector<T> pad(static_cast<std::size_t>(geo.buffer), T(0));
  std::vector<T> acc(static_cast<std::size_t>(geo.span));
  for (i64 c = 0; c < xs.c; ++c) {
    const T* wk = w + c * geo.taps;
    const T bv = bias ? (*bias)[c] : T(0);
    for (i64 b = 0; b < xs.n; ++b) {
      pad_plane(x.plane(b, c), xs, spec.padding, geo.pw, pad.data());
      std::fill(acc.begin(), acc.end(), bv);
      for (i64 t = 0; t < geo.taps; ++t) {
        axpy(wk[t], pad.data() + geo.tap_offset(spec, t), acc.data(), geo.span);
      }
      T* o = out.plane(b, c);
      for (i64 oh = 0; oh < os.h; ++oh) {
        std::copy_n(acc.data() + oh * geo.pw, os.w, o + oh * os.w);
      }
    }
  }
}

template <typename T>
void depthwise_backward(const Tensor<T>& grad_out, const Tensor<T>& x,
                        const T* w, const ConvSpec& spec, Tensor<T>& gx,
                        T* gw) {
  const Shape xs = x.shape();
  const Shape os = grad_out.shape();
  const DepthwiseGeometry geo(spec, xs, os);
  std::vector<T> pad(static_cast<std::size_t>(geo.buffer), T(0));
  std::vector<T> gpad(static_cast<std::size_t>(geo.buffer));
  // grad_out in the padded pitch; columns past os.w stay zero.
  std::vector<T> g(static_cast<std::size_t>(geo.span), T(0));
  for (i64 c = 0; c < xs.c; ++c) {
    const T* wk = w + c * geo.taps;
    T* gwk = gw + c * geo.taps;
    for (i64 b = 0; b < xs.n; ++b) {
      pad_plane(x.plane(b, c), xs, spec.padding, geo.pw, pad.data());
      const T* gp = grad_out.plane(b, c);
      for (i64 oh = 0; oh < os.h; ++oh) {
        std::copy_n(gp + oh * os.w, os.w, g.data() + oh * geo.pw);
      }
      std::fill(gpad.begin(), gpad.end(), T(0));
      for (i64 t = 0; t < geo.taps; ++t) {
        const i64 off = geo.tap_offset(spec, t);
        axpy(wk[t], g.data(), gpad.data() + off, geo.span);
        gwk[t] += dot(g.data(), pad.data() + off, geo.span);
      }
      T* gxp = gx.plane(b, c);
      for (i64 h = 0; h < xs.h; ++h) {
        std::copy_n(gpad.data() + (h + spec.padding) * geo.pw + spec.padding,
                    xs.w, gxp + h * xs.w);
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// ConvSpec

void ConvSpec::validate() const {
  if (in_channels < 1 || out_channels < 1 || kernel_h < 1 || kernel_w < 1 ||
      stride < 1 || dilation < 1 || groups < 1 || padding < 0) {
    throw SpecError("conv spec has non-positive field (in=" +
                    std::to_string(in_channels) + ", out=" +
                    std::to_string(out_channels) + ", k=" +
                    std::to_string(kernel_h) + "x" + std::to_string(kernel_w) +
                    ", stride=" + std::to_string(stride) + ", dilation=" +
                    std::to_string(dilation) + ", padding=" +
                    std::to_string(padding) + ", groups=" +
                    std::to_string(groups) + ")");
  }
  if (in_channels % groups != 0 || out_channels % groups != 0) {
    throw SpecError("conv spec: channels " + std::to_string(in_channels) +
                    "->" + std::to_string(out_channels) +
                    " not divisible by groups " + std::to_string(groups));
  }
}

std::int64_t ConvSpec::output_extent(std::int64_t size,
                                     std::int64_t kernel) const {
  const i64 span = dilation * (kernel - 1) + 1;
  const i64 numer = size + 2 * padding - span;
  if (numer < 0) {
    throw SpecError("conv spec: kernel span " + std::to_string(span) +
                    " exceeds padded extent " +
                    std::to_string(size + 2 * padding));
  }
  return numer / stride + 1;
}

Shape ConvSpec::output_shape(const Shape& input) const {
  return {input.n, out_channels, output_extent(input.h, kernel_h),
          output_extent(input.w, kernel_w)};
}

Shape ConvSpec::weight_shape() const {
  return {out_channels, in_channels / groups, kernel_h, kernel_w};
}

std::int64_t ConvSpec::macs(const Shape& input) const {
  const Shape out = output_shape(input);
  return out.numel() * fan_in();
}

// ---------------------------------------------------------------------------
// Convolution

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& weight,
                         const std::type_identity_t<Tensor<T>>* bias, const ConvSpec& spec) {
  check_conv_operands(x.shape(), weight.shape(),
                      bias ? &bias->shape() : nullptr, spec);
  const Shape xs = x.shape();
  const Shape os = spec.output_shape(xs);
  Tensor<T> out(os);
  MacCounter::record(spec.macs(xs));

  if (is_depthwise_unit_stride(spec)) {
    depthwise_forward(x, weight.ptr(), bias, spec, out);
    return out;
  }
  if (is_pointwise(spec)) {
    // Each sample is already a (C, H*W) matrix.
    const i64 hw = xs.plane();
    for (i64 b = 0; b < xs.n; ++b) {
      if (bias) {
        for (i64 oc = 0; oc < os.c; ++oc) {
          std::fill_n(out.plane(b, oc), hw, (*bias)[oc]);
        }
      }
      gemm(os.c, hw, xs.c, weight.ptr(), xs.c, i64{1}, x.plane(b, 0),
           out.plane(b, 0));
    }
    return out;
  }

  const i64 cin_g = spec.in_channels / spec.groups;
  const i64 cout_g = spec.out_channels / spec.groups;
  const i64 kk = spec.kernel_h * spec.kernel_w;
  const i64 st = spec.stride;
  for (i64 b = 0; b < xs.n; ++b) {
    for (i64 oc = 0; oc < os.c; ++oc) {
      T* o = out.plane(b, oc);
      if (bias) std::fill_n(o, os.plane(), (*bias)[oc]);
      const i64 c0 = oc / cout_g * cin_g;
      for (i64 j = 0; j < cin_g; ++j) {
        const T* xp = x.plane(b, c0 + j);
        const T* wk = weight.ptr() + (oc * cin_g + j) * kk;
        for_each_tap_row(spec, xs, os, [&](i64 kh, i64 kw, i64 oh, i64 row, i64 col, Range cols) {
          const T w = wk[kh * spec.kernel_w + kw];
          const T* xr = xp + row + col + cols.lo * st;
          T* orow = o + oh * os.w + cols.lo;
          const i64 len = cols.hi - cols.lo;
          if (st == 1) {
            axpy(w, xr, orow, len);
          } else {
            for (i64 i = 0; i < len; ++i) orow[i] += w * xr[i * st];
          }
        });
      }
    }
  }
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& x,
                             const Tensor<T>& weight, const ConvSpec& spec,
                             bool with_bias) {
  check_conv_operands(x.shape(), weight.shape(), nullptr, spec);
  const Shape xs = x.shape();
  const Shape os = spec.output_shape(xs);
  require_same_shape(grad_out.shape(), os, "conv2d_backward grad_out");

  ConvGrads<T> grads{Tensor<T>(xs), Tensor<T>(weight.shape()),
                     with_bias ? Tensor<T>(spec.bias_shape()) : Tensor<T>()};
  if (with_bias) {
    for (i64 oc = 0; oc < os.c; ++oc) {
      T acc = 0;
      for (i64 b = 0; b < os.n; ++b) acc += sum(grad_out.plane(b, oc), os.plane());
      grads.bias[oc] = acc;
    }
  }

  if (is_depthwise_unit_stride(spec)) {
    depthwise_backward(grad_out, x, weight.ptr(), spec, grads.input,
                       grads.weight.ptr());
    return grads;
  }
  if (is_pointwise(spec)) {
    const i64 hw = xs.plane();
    std::vector<T> xt(static_cast<std::size_t>(hw * xs.c));
    for (i64 b = 0; b < xs.n; ++b) {
      gemm(xs.c, hw, os.c, weight.ptr(), i64{1}, xs.c, grad_out.plane(b, 0),
           grads.input.plane(b, 0));
      const T* xb = x.plane(b, 0);
      for (i64 c = 0; c < xs.c; ++c) {
        for (i64 i = 0; i < hw; ++i) xt[static_cast<std::size_t>(i * xs.c + c)] = xb[c * hw + i];
      }
      gemm(os.c, xs.c, hw, grad_out.plane(b, 0), hw, i64{1}, xt.data(),
           grads.weight.ptr());
    }
    return grads;
  }

  const i64 cin_g = spec.in_channels / spec.groups;
  const i64 cout_g = spec.out_channels / spec.groups;
  const i64 kk = spec.kernel_h * spec.kernel_w;
  const i64 st = spec.stride;
  for (i64 b = 0; b < xs.n; ++b) {
    for (i64 oc = 0; oc < os.c; ++oc) {
      const T* g = grad_out.plane(b, oc);
      const i64 c0 = oc / cout_g * cin_g;
      for (i64 j = 0; j < cin_g; ++j) {
        const T* xp = x.plane(b, c0 + j);
        T* gxp = grads.input.plane(b, c0 + j);
        const T* wk = weight.ptr() + (oc * cin_g + j) * kk;
        T* gwk = grads.weight.ptr() + (oc * cin_g + j) * kk;
        for_each_tap_row(spec, xs, os, [&](i64 kh, i64 kw, i64 oh, i64 row, i64 col, Range cols) {
          const i64 t = kh * spec.kernel_w + kw;
          const T* grow = g + oh * os.w + cols.lo;
          const i64 in_off = row + col + cols.lo * st;
          const T* xr = xp + in_off;
          T* gxr = gxp + in_off;
          const i64 len = cols.hi - cols.lo;
          if (st == 1) {
            gwk[t] += dot(grow, xr, len);
            axpy(wk[t], grow, gxr, len);
          } else {
            T acc = 0;
            for (i64 i = 0; i < len; ++i) {
              acc += grow[i] * xr[i * st];
              gxr[i * st] += wk[t] * grow[i];
            }
            gwk[t] += acc;
          }
        });
      }
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Batch normalization

template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, const Tensor<T>& gamma,
                            const Tensor<T>& beta, BatchNormStats<T>& stats,
                            Mode mode, const BatchNormOptions& options,
                            std::type_identity_t<BatchNormCache<T>>* cache) {
  const Shape xs = x.shape();
  require_nonempty(xs, "batchnorm input");
  const Shape cs{1, xs.c, 1, 1};
  if (!(gamma.shape() == cs) || !(beta.shape() == cs) ||
      !(stats.mean.shape() == cs) || !(stats.var.shape() == cs)) {
    throw ShapeError("batchnorm: parameters " + gamma.shape().str() +
                     " do not match channel count " + std::to_string(xs.c));
  }
  const i64 hw = xs.plane();
  const i64 count = xs.n * hw;
  Tensor<T> out(xs);
  Tensor<T> normalized(xs);
  std::vector<T> inv_std(static_cast<std::size_t>(xs.c));

  for (i64 c = 0; c < xs.c; ++c) {
    double mean = 0.0;
    double var = 0.0;
    if (mode == Mode::kTrain) {
      for (i64 b = 0; b < xs.n; ++b) {
        const T* xp = x.plane(b, c);
        for (i64 i = 0; i < hw; ++i) mean += xp[i];
      }
      mean /= static_cast<double>(count);
      for (i64 b = 0; b < xs.n; ++b) {
        const T* xp = x.plane(b, c);
        for (i64 i = 0; i < hw; ++i) {
          const double dv = xp[i] - mean;
          var += dv * dv;
        }
      }
      var /= static_cast<double>(count);
      const double unbiased =
          count > 1 ? var * count / static_cast<double>(count - 1) : var;
      const double m = options.momentum;
      stats.mean[c] = static_cast<T>((1.0 - m) * stats.mean[c] + m * mean);
      stats.var[c] = static_cast<T>((1.0 - m) * stats.var[c] + m * unbiased);
    } else {
      mean = stats.mean[c];
      var = stats.var[c];
    }
    const T istd = static_cast<T>(1.0 / std::sqrt(var + options.epsilon));
    const T mu = static_cast<T>(mean);
    inv_std[c] = istd;
    const T gm = gamma[c], bt = beta[c];
    for (i64 b = 0; b < xs.n; ++b) {
      const T* xp = x.plane(b, c);
      T* np = normalized.plane(b, c);
      T* op = out.plane(b, c);
      for (i64 i = 0; i < hw; ++i) {
        np[i] = (xp[i] - mu) * istd;
        op[i] = gm * np[i] + bt;
      }
    }
  }
  if (cache) {
    cache->mode = mode;
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const Tensor<T>& grad_out,
                                     const Tensor<T>& gamma,
                                     const BatchNormCache<T>& cache) {
  const Shape xs = cache.normalized.shape();
  require_same_shape(grad_out.shape(), xs, "batchnorm_backward grad_out");
  const Shape cs{1, xs.c, 1, 1};
  BatchNormGrads<T> grads{Tensor<T>(xs), Tensor<T>(cs), Tensor<T>(cs)};
  const i64 hw = xs.plane();
  const T count = static_cast<T>(xs.n * hw);

  for (i64 c = 0; c < xs.c; ++c) {
    T sum_g = 0, sum_gx = 0;
    for (i64 b = 0; b < xs.n; ++b) {
      const T* gp = grad_out.plane(b, c);
      const T* np = cache.normalized.plane(b, c);
      sum_g += sum(gp, hw);
      sum_gx += dot(gp, np, hw);
    }
    grads.gamma[c] = sum_gx;
    grads.beta[c] = sum_g;
    const T k = gamma[c] * cache.inv_std[c];
    for (i64 b = 0; b < xs.n; ++b) {
      const T* gp = grad_out.plane(b, c);
      const T* np = cache.normalized.plane(b, c);
      T* dx = grads.input.plane(b, c);
      if (cache.mode == Mode::kTrain) {
        const T mg = sum_g / count, mgx = sum_gx / count;
        for (i64 i = 0; i < hw; ++i) dx[i] = k * (gp[i] - mg - np[i] * mgx);
      } else {
        for (i64 i = 0; i < hw; ++i) dx[i] = k * gp[i];
      }
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Pooling

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  const Shape xs = x.shape();
  require_nonempty(xs, "global_avg_pool input");
  Tensor<T> out({xs.n, xs.c, 1, 1});
  const i64 hw = xs.plane();
  for (i64 b = 0; b < xs.n; ++b) {
    for (i64 c = 0; c < xs.c; ++c) {
      out(b, c, 0, 0) = sum(x.plane(b, c), hw) / static_cast<T>(hw);
    }
  }
  return out;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& grad_out,
                                   const Shape& input_shape) {
  require_same_shape(grad_out.shape(), {input_shape.n, input_shape.c, 1, 1},
                     "global_avg_pool_backward grad_out");
  Tensor<T> gx(input_shape);
  const i64 hw = input_shape.plane();
  for (i64 b = 0; b < input_shape.n; ++b) {
    for (i64 c = 0; c < input_shape.c; ++c) {
      const T v = grad_out(b, c, 0, 0) / static_cast<T>(hw);
      std::fill(gx.plane(b, c), gx.plane(b, c) + hw, v);
    }
  }
  return gx;
}

template <typename T>
Tensor<T> global_max_pool(const Tensor<T>& x,
                          std::vector<std::int64_t>* argmax) {
  const Shape xs = x.shape();
  require_nonempty(xs, "global_max_pool input");
  Tensor<T> out({xs.n, xs.c, 1, 1});
  if (argmax) argmax->assign(static_cast<std::size_t>(xs.n * xs.c), 0);
  const i64 hw = xs.plane();
  for (i64 b = 0; b < xs.n; ++b) {
    for (i64 c = 0; c < xs.c; ++c) {
      const T* p = x.plane(b, c);
      i64 best = 0;
      for (i64 i = 1; i < hw; ++i) {
        if (p[i] > p[best]) best = i;
      }
      out(b, c, 0, 0) = p[best];
      if (argmax) (*argmax)[b * xs.c + c] = x.offset(b, c, 0, 0) + best;
    }
  }
  return out;
}

template <typename T>
Tensor<T> global_max_pool_backward(const Tensor<T>& grad_out,
                                   std::span<const std::int64_t> argmax,
                                   const Shape& input_shape) {
  require_same_shape(grad_out.shape(), {input_shape.n, input_shape.c, 1, 1},
                     "global_max_pool_backward grad_out");
  if (static_cast<i64>(argmax.size()) != input_shape.n * input_shape.c) {
    throw ShapeError("global_max_pool_backward: argmax size mismatch");
  }
  Tensor<T> gx(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += grad_out[i];
  return gx;
}

template <typename T>
Tensor<T> channel_mean(const Tensor<T>& x) {
  const Shape xs = x.shape();
  require_nonempty(xs, "channel_mean input");
  Tensor<T> out({xs.n, 1, xs.h, xs.w});
  const i64 hw = xs.plane();
  const T inv = T(1) / static_cast<T>(xs.c);
  for (i64 b = 0; b < xs.n; ++b) {
    T* o = out.plane(b, 0);
    for (i64 c = 0; c < xs.c; ++c) axpy(T(1), x.plane(b, c), o, hw);
    for (i64 i = 0; i < hw; ++i) o[i] *= inv;
  }
  return out;
}

template <typename T>
Tensor<T> channel_mean_backward(const Tensor<T>& grad_out,
                                const Shape& input_shape) {
  require_same_shape(grad_out.shape(),
                     {input_shape.n, 1, input_shape.h, input_shape.w},
                     "channel_mean_backward grad_out");
  Tensor<T> gx(input_shape);
  const i64 hw = input_shape.plane();
  const T inv = T(1) / static_cast<T>(input_shape.c);
  for (i64 b = 0; b < input_shape.n; ++b) {
    const T* g = grad_out.plane(b, 0);
    for (i64 c = 0; c < input_shape.c; ++c) axpy(inv, g, gx.plane(b, c), hw);
  }
  return gx;
}

template <typename T>
Tensor<T> channel_max(const Tensor<T>& x, std::vector<std::int64_t>* argmax) {
  const Shape xs = x.shape();
  require_nonempty(xs, "channel_max input");
  Tensor<T> out({xs.n, 1, xs.h, xs.w});
  const i64 hw = xs.plane();
  std::vector<std::int64_t> arg(static_cast<std::size_t>(xs.n * hw));
  for (i64 b = 0; b < xs.n; ++b) {
    T* o = out.plane(b, 0);
    std::copy(x.plane(b, 0), x.plane(b, 0) + hw, o);
    std::int64_t* a = arg.data() + b * hw;
    std::fill(a, a + hw, 0);
    for (i64 c = 1; c < xs.c; ++c) {
      const T* p = x.plane(b, c);
      for (i64 i = 0; i < hw; ++i) {
        if (p[i] > o[i]) {
          o[i] = p[i];
          a[i] = c;
        }
      }
    }
    // Store flat input offsets.
    for (i64 i = 0; i < hw; ++i) a[i] = x.offset(b, a[i], 0, 0) + i;
  }
  if (argmax) *argmax = std::move(arg);
  return out;
}

template <typename T>
Tensor<T> channel_max_backward(const Tensor<T>& grad_out,
                               std::span<const std::int64_t> argmax,
                               const Shape& input_shape) {
  require_same_shape(grad_out.shape(),
                     {input_shape.n, 1, input_shape.h, input_shape.w},
                     "channel_max_backward grad_out");
  if (static_cast<i64>(argmax.size()) != grad_out.numel()) {
    throw ShapeError("channel_max_backward: argmax size mismatch");
  }
  Tensor<T> gx(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += grad_out[i];
  return gx;
}

// ---------------------------------------------------------------------------
// Fully connected

template <typename T>
Tensor<T> fully_connected(const Tensor<T>& x, const Tensor<T>& weight,
                          const std::type_identity_t<Tensor<T>>* bias) {
  const Shape xs = x.shape();
  require_nonempty(xs, "fully_connected input");
  if (xs.h != 1 || xs.w != 1) {
    throw ShapeError("fully_connected: input must be (B, C, 1, 1), got " +
                     xs.str());
  }
  const Shape ws = weight.shape();
  if (ws.c != xs.c || ws.h != 1 || ws.w != 1) {
    throw ShapeError("fully_connected: weight " + ws.str() +
                     " incompatible with input " + xs.str());
  }
  if (bias && !(bias->shape() == Shape{1, ws.n, 1, 1})) {
    throw ShapeError("fully_connected: bias " + bias->shape().str() +
                     " expected " + dims(1, ws.n, 1, 1));
  }
  MacCounter::record(xs.n * ws.n * ws.c);
  Tensor<T> out({xs.n, ws.n, 1, 1});
  for (i64 b = 0; b < xs.n; ++b) {
    const T* xr = x.ptr() + b * xs.c;
    for (i64 o = 0; o < ws.n; ++o) {
      out(b, o, 0, 0) = dot(weight.ptr() + o * ws.c, xr, xs.c) +
                        (bias ? (*bias)[o] : T(0));
    }
  }
  return out;
}

template <typename T>
LinearGrads<T> fully_connected_backward(const Tensor<T>& grad_out,
                                        const Tensor<T>& x,
                                        const Tensor<T>& weight,
                                        bool with_bias) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  require_same_shape(grad_out.shape(), {xs.n, ws.n, 1, 1},
                     "fully_connected_backward grad_out");
  LinearGrads<T> grads{Tensor<T>(xs), Tensor<T>(ws),
                       with_bias ? Tensor<T>({1, ws.n, 1, 1}) : Tensor<T>()};
  for (i64 b = 0; b < xs.n; ++b) {
    const T* xr = x.ptr() + b * xs.c;
    T* gxr = grads.input.ptr() + b * xs.c;
    for (i64 o = 0; o < ws.n; ++o) {
      const T g = grad_out(b, o, 0, 0);
      axpy(g, weight.ptr() + o * ws.c, gxr, xs.c);
      axpy(g, xr, grads.weight.ptr() + o * ws.c, xs.c);
      if (with_bias) grads.bias[o] += g;
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Activations

const char* activation_name(Activation act) {
  switch (act) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kRelu:
      return "relu";
    case Activation::kSigmoid:
      return "sigmoid";
  }
  return "?";
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "identity") return Activation::kIdentity;
  throw SpecError("unknown activation '" + name + "'");
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  // Saturated values are pulled one step inside so outputs stay in (0, 1).
  const T lo = std::numeric_limits<T>::min();
  const T hi = std::nextafter(T(1), T(0));
  Tensor<T> y(x.shape());
  for (i64 i = 0; i < x.numel(); ++i) {
    const T v = x[i];
    // Split on sign so exp never overflows.
    T s;
    if (v >= 0) {
      s = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      s = e / (T(1) + e);
    }
    y[i] = std::clamp(s, lo, hi);
  }
  return y;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& grad_out, const Tensor<T>& output) {
  require_same_shape(grad_out.shape(), output.shape(), "sigmoid_backward");
  Tensor<T> g(output.shape());
  for (i64 i = 0; i < g.numel(); ++i) {
    g[i] = grad_out[i] * output[i] * (T(1) - output[i]);
  }
  return g;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (i64 i = 0; i < x.numel(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& input) {
  require_same_shape(grad_out.shape(), input.shape(), "relu_backward");
  Tensor<T> g(input.shape());
  for (i64 i = 0; i < g.numel(); ++i) g[i] = input[i] > T(0) ? grad_out[i] : T(0);
  return g;
}

template <typename T>
Tensor<T> activation_forward(Activation act, const Tensor<T>& x) {
  switch (act) {
    case Activation::kRelu:
      return relu(x);
    case Activation::kSigmoid:
      return sigmoid(x);
    case Activation::kIdentity:
      break;
  }
  return x;
}

template <typename T>
Tensor<T> activation_backward(Activation act, const Tensor<T>& grad_out,
                              const Tensor<T>& input, const Tensor<T>& output) {
  switch (act) {
    case Activation::kRelu:
      return relu_backward(grad_out, input);
    case Activation::kSigmoid:
      return sigmoid_backward(grad_out, output);
    case Activation::kIdentity:
      break;
  }
  return grad_out;
}

// ---------------------------------------------------------------------------
// Elementwise

namespace {

void check_broadcast(const Shape& a, const Shape& b, const char* what) {
  auto ok = [](i64 x, i64 y) { return y == x || y == 1; };
  if (!ok(a.n, b.n) || !ok(a.c, b.c) || !ok(a.h, b.h) || !ok(a.w, b.w)) {
    throw ShapeError(std::string(what) + ": cannot broadcast " + b.str() +
                     " against " + a.str());
  }
}

}  // namespace

template <typename T>
Tensor<T> mul_broadcast(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape as = a.shape(), bs = b.shape();
  check_broadcast(as, bs, "mul_broadcast");
  Tensor<T> out(as);
  const i64 sw = bs.w == 1 ? 0 : 1;
  for (i64 n = 0; n < as.n; ++n) {
    for (i64 c = 0; c < as.c; ++c) {
      for (i64 h = 0; h < as.h; ++h) {
        const T* ap = a.ptr() + a.offset(n, c, h, 0);
        T* op = out.ptr() + a.offset(n, c, h, 0);
        const T* bp = b.ptr() + b.offset(bs.n == 1 ? 0 : n, bs.c == 1 ? 0 : c,
                                         bs.h == 1 ? 0 : h, 0);
        for (i64 w = 0; w < as.w; ++w) op[w] = ap[w] * bp[w * sw];
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> reduce_to_shape(const Tensor<T>& grad, const Shape& target) {
  const Shape gs = grad.shape();
  check_broadcast(gs, target, "reduce_to_shape");
  if (gs == target) return grad;
  Tensor<T> out(target);
  const i64 sw = target.w == 1 ? 0 : 1;
  for (i64 n = 0; n < gs.n; ++n) {
    for (i64 c = 0; c < gs.c; ++c) {
      for (i64 h = 0; h < gs.h; ++h) {
        const T* gp = grad.ptr() + grad.offset(n, c, h, 0);
        T* op = out.ptr() + out.offset(target.n == 1 ? 0 : n,
                                       target.c == 1 ? 0 : c,
                                       target.h == 1 ? 0 : h, 0);
        if (sw == 0) {
          op[0] += sum(gp, gs.w);
        } else {
          for (i64 w = 0; w < gs.w; ++w) op[w] += gp[w];
        }
      }
    }
  }
  return out;
}

template <typename T>
BinaryGrads<T> mul_broadcast_backward(const Tensor<T>& grad_out,
                                      const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(grad_out.shape(), a.shape(), "mul_broadcast_backward");
  return {mul_broadcast(grad_out, b),
          reduce_to_shape(mul_broadcast(grad_out, a), b.shape())};
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> out = a;
  accumulate(out, b);
  return out;
}

template <typename T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
  require_same_shape(dst.shape(), src.shape(), "accumulate");
  axpy(T(1), src.ptr(), dst.ptr(), dst.numel());
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  Tensor<T> out(x.shape());
  for (i64 i = 0; i < x.numel(); ++i) out[i] = x[i] * factor;
  return out;
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const Shape first = parts[0].shape();
  i64 channels = 0;
  for (const auto& p : parts) {
    const Shape s = p.shape();
    require_nonempty(s, "concat_channels input");
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw ShapeError("concat_channels: " + s.str() + " incompatible with " +
                       first.str());
    }
    channels += s.c;
  }
  Tensor<T> out({first.n, channels, first.h, first.w});
  const i64 hw = first.plane();
  for (i64 b = 0; b < first.n; ++b) {
    i64 c0 = 0;
    for (const auto& p : parts) {
      const i64 block = p.shape().c * hw;
      std::copy(p.plane(b, 0), p.plane(b, 0) + block, out.plane(b, c0));
      c0 += p.shape().c;
    }
  }
  return out;
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::int64_t begin,
                         std::int64_t count) {
  const Shape xs = x.shape();
  if (begin < 0 || count < 1 || begin + count > xs.c) {
    throw ShapeError("slice_channels: [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " +
                     xs.str());
  }
  Tensor<T> out({xs.n, count, xs.h, xs.w});
  const i64 block = count * xs.plane();
  for (i64 b = 0; b < xs.n; ++b) {
    std::copy(x.plane(b, begin), x.plane(b, begin) + block, out.plane(b, 0));
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x, std::int64_t parts) {
  if (parts < 1 || x.shape().c % parts != 0) {
    throw ShapeError("split_channels: " + std::to_string(x.shape().c) +
                     " channels not divisible into " + std::to_string(parts));
  }
  const i64 width = x.shape().c / parts;
  std::vector<Tensor<T>> out;
  out.reserve(static_cast<std::size_t>(parts));
  for (i64 i = 0; i < parts; ++i) out.push_back(slice_channels(x, i * width, width));
  return out;
}

// ---------------------------------------------------------------------------
// MacCounter

MacCounter::MacCounter() : previous_(g_active_counter) { g_active_counter = this; }

MacCounter::~MacCounter() { g_active_counter = previous_; }

void MacCounter::record(std::int64_t macs) {
  if (g_active_counter) g_active_counter->macs_ += macs;
}

// ---------------------------------------------------------------------------

#define MKS_INSTANTIATE_OPS(T)                                                 \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&,        \
                                    const Tensor<T>*, const ConvSpec&);        \
  template ConvGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&,    \
                                        const Tensor<T>&, const ConvSpec&,     \
                                        bool);                                 \
  template Tensor<T> batchnorm_forward(                                        \
      const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,                    \
      BatchNormStats<T>&, Mode, const BatchNormOptions&, BatchNormCache<T>*);  \
  template BatchNormGrads<T> batchnorm_backward(                               \
      const Tensor<T>&, const Tensor<T>&, const BatchNormCache<T>&);           \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                        \
  template Tensor<T> global_avg_pool_backward(const Tensor<T>&, const Shape&); \
  template Tensor<T> global_max_pool(const Tensor<T>&,                         \
                                     std::vector<std::int64_t>*);              \
  template Tensor<T> global_max_pool_backward(                                 \
      const Tensor<T>&, std::span<const std::int64_t>, const Shape&);          \
  template Tensor<T> channel_mean(const Tensor<T>&);                           \
  template Tensor<T> channel_mean_backward(const Tensor<T>&, const Shape&);    \
  template Tensor<T> channel_max(const Tensor<T>&, std::vector<std::int64_t>*);\
  template Tensor<T> channel_max_backward(                                     \
      const Tensor<T>&, std::span<const std::int64_t>, const Shape&);          \
  template Tensor<T> fully_connected(const Tensor<T>&, const Tensor<T>&,       \
                                     const Tensor<T>*);                        \
  template LinearGrads<T> fully_connected_backward(                            \
      const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, bool);             \
  template Tensor<T> sigmoid(const Tensor<T>&);                                \
  template Tensor<T> sigmoid_backward(const Tensor<T>&, const Tensor<T>&);     \
  template Tensor<T> relu(const Tensor<T>&);                                   \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> activation_forward(Activation, const Tensor<T>&);         \
  template Tensor<T> activation_backward(Activation, const Tensor<T>&,         \
                                         const Tensor<T>&, const Tensor<T>&);  \
  template Tensor<T> mul_broadcast(const Tensor<T>&, const Tensor<T>&);        \
  template BinaryGrads<T> mul_broadcast_backward(                              \
      const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> reduce_to_shape(const Tensor<T>&, const Shape&);          \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                  \
  template void accumulate(Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> scale(const Tensor<T>&, T);                               \
  template Tensor<T> concat_channels(std::span<const Tensor<T>>);              \
  template Tensor<T> slice_channels(const Tensor<T>&, std::int64_t,            \
                                    std::int64_t);                             \
  template std::vector<Tensor<T>> split_channels(const Tensor<T>&,             \
                                                 std::int64_t);

MKS_INSTANTIATE_OPS(float)
MKS_INSTANTIATE_OPS(double)

#undef MKS_INSTANTIATE_OPS

}  // namespace mks

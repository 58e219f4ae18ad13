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

#include "mks/gradcheck_suite.hpp"

#include <cmath>

#include "mks/attention.hpp"
#include "mks/backbone.hpp"
#include "mks/block.hpp"
#include "mks/error.hpp"
#include "mks/loss.hpp"

namespace mks {
namespace {

using D = double;
using Grads = std::vector<Tensor<D>>;

constexpr double kOpTolerance = 1e-6;
constexpr double kModuleTolerance = 1e-5;

Tensor<D> uniform(const Shape& s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<D> t(s);
  for (D& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Values in +-[0.1, 1], away from the ReLU kink.
Tensor<D> off_zero(const Shape& s, Rng& rng) {
  Tensor<D> t(s);
  for (D& v : t.data()) {
    const double m = rng.uniform(0.1, 1.0);
    v = rng.uniform() < 0.5 ? -m : m;
  }
  return t;
}

GradCheckReport check(const std::string& name, GradCheckCase c, double tol,
                      bool perturb) {
  if (perturb) {
    auto inner = std::move(c.backward);
    c.backward = [inner](const Tensor<D>& r) {
      Grads g = inner(r);
      g[0] = scale(g[0], 1.01);
      return g;
    };
  }
  GradCheckOptions opts;
  opts.tolerance = tol;
  return gradcheck(name, c, opts);
}

template <typename Net>
std::vector<Param<D>*> params_of(Net& net) {
  std::vector<Param<D>*> out;
  net.visit([&](Param<D>& p) { out.push_back(&p); });
  return out;
}

// Case over (x, params...) where `backward_x` runs a cached forward and the
// backward pass for R, returning dL/dx with parameter grads accumulated.
GradCheckCase module_case(Tensor<D>& x, std::vector<Param<D>*> params,
                          std::function<Tensor<D>()> forward,
                          std::function<Tensor<D>(const Tensor<D>&)> backward_x) {
  GradCheckCase c;
  c.inputs.push_back({"x", &x});
  for (Param<D>* p : params) c.inputs.push_back({p->name, &p->value});
  c.forward = std::move(forward);
  c.backward = [params, backward_x](const Tensor<D>& r) {
    for (Param<D>* p : params) p->zero_grad();
    Grads g{backward_x(r)};
    for (Param<D>* p : params) g.push_back(p->grad);
    return g;
  };
  return c;
}

template <typename Net>
void init_perturbed(Net& net, Rng& rng) {
  net.init(rng);
  // Non-trivial biases, norms and residual scales.
  net.visit([&](Param<D>& p) {
    for (D& v : p.value.data()) v += rng.uniform(-0.3, 0.3);
  });
}

// --- ops ---------------------------------------------------------------

GradCheckReport conv_unit(const std::string& name, const Shape& xs,
                          const ConvSpec& spec, bool perturb) {
  Rng rng(11);
  Tensor<D> x = uniform(xs, rng);
  Tensor<D> w = uniform(spec.weight_shape(), rng);
  Tensor<D> b = uniform(spec.bias_shape(), rng);
  GradCheckCase c;
  c.inputs = {{"x", &x}, {"weight", &w}, {"bias", &b}};
  c.forward = [&] { return conv2d_forward(x, w, &b, spec); };
  c.backward = [&](const Tensor<D>& r) {
    ConvGrads<D> g = conv2d_backward(r, x, w, spec, true);
    return Grads{g.input, g.weight, g.bias};
  };
  return check(name, c, kOpTolerance, perturb);
}

GradCheckReport batchnorm_unit(const std::string& name, Mode mode, bool perturb) {
  Rng rng(12);
  Tensor<D> x = uniform({4, 3, 4, 4}, rng, -2.0, 2.0);
  Tensor<D> gamma = uniform({1, 3, 1, 1}, rng, 0.5, 1.5);
  Tensor<D> beta = uniform({1, 3, 1, 1}, rng);
  BatchNormStats<D> stats(3);
  for (D& v : stats.mean.data()) v = rng.uniform(-0.5, 0.5);
  for (D& v : stats.var.data()) v = rng.uniform(0.5, 2.0);
  const BatchNormOptions opts;
  GradCheckCase c;
  c.inputs = {{"x", &x}, {"gamma", &gamma}, {"beta", &beta}};
  c.forward = [&] {
    BatchNormStats<D> s = stats;
    return batchnorm_forward<D>(x, gamma, beta, s, mode, opts, nullptr);
  };
  c.backward = [&](const Tensor<D>& r) {
    BatchNormStats<D> s = stats;
    BatchNormCache<D> cache;
    batchnorm_forward(x, gamma, beta, s, mode, opts, &cache);
    BatchNormGrads<D> g = batchnorm_backward(r, gamma, cache);
    return Grads{g.input, g.gamma, g.beta};
  };
  return check(name, c, kOpTolerance, perturb);
}

GradCheckReport unary_unit(const std::string& name, Tensor<D> x,
                           std::function<Tensor<D>(const Tensor<D>&)> f,
                           std::function<Tensor<D>(const Tensor<D>&, const Tensor<D>&)> df,
                           bool perturb) {
  GradCheckCase c;
  c.inputs = {{"x", &x}};
  c.forward = [&] { return f(x); };
  c.backward = [&](const Tensor<D>& r) { return Grads{df(r, x)}; };
  return check(name, c, kOpTolerance, perturb);
}

GradCheckReport pool_unit(const std::string& name, bool perturb) {
  Rng rng(13);
  const Shape s = name.starts_with("global") ? Shape{2, 3, 4, 4} : Shape{2, 4, 3, 3};
  Tensor<D> x = uniform(s, rng);
  std::function<Tensor<D>(const Tensor<D>&)> f;
  std::function<Tensor<D>(const Tensor<D>&, const Tensor<D>&)> df;
  if (name == "global_avg_pool") {
    f = [](const Tensor<D>& v) { return global_avg_pool(v); };
    df = [](const Tensor<D>& r, const Tensor<D>& v) {
      return global_avg_pool_backward(r, v.shape());
    };
  } else if (name == "global_max_pool") {
    f = [](const Tensor<D>& v) { return global_max_pool<D>(v, nullptr); };
    df = [](const Tensor<D>& r, const Tensor<D>& v) {
      std::vector<std::int64_t> idx;
      global_max_pool(v, &idx);
      return global_max_pool_backward<D>(r, idx, v.shape());
    };
  } else if (name == "channel_mean") {
    f = [](const Tensor<D>& v) { return channel_mean(v); };
    df = [](const Tensor<D>& r, const Tensor<D>& v) {
      return channel_mean_backward(r, v.shape());
    };
  } else {
    f = [](const Tensor<D>& v) { return channel_max<D>(v, nullptr); };
    df = [](const Tensor<D>& r, const Tensor<D>& v) {
      std::vector<std::int64_t> idx;
      channel_max(v, &idx);
      return channel_max_backward<D>(r, idx, v.shape());
    };
  }
  return unary_unit(name, x, f, df, perturb);
}

GradCheckReport fc_unit(bool perturb) {
  Rng rng(14);
  Tensor<D> x = uniform({3, 5, 1, 1}, rng);
  Tensor<D> w = uniform({4, 5, 1, 1}, rng);
  Tensor<D> b = uniform({1, 4, 1, 1}, rng);
  GradCheckCase c;
  c.inputs = {{"x", &x}, {"weight", &w}, {"bias", &b}};
  c.forward = [&] { return fully_connected(x, w, &b); };
  c.backward = [&](const Tensor<D>& r) {
    LinearGrads<D> g = fully_connected_backward(r, x, w, true);
    return Grads{g.input, g.weight, g.bias};
  };
  return check("fully_connected", c, kOpTolerance, perturb);
}

GradCheckReport mul_unit(const std::string& name, const Shape& bs, bool perturb) {
  Rng rng(15);
  Tensor<D> a = uniform({2, 3, 4, 4}, rng);
  Tensor<D> b = uniform(bs, rng);
  GradCheckCase c;
  c.inputs = {{"a", &a}, {"b", &b}};
  c.forward = [&] { return mul_broadcast(a, b); };
  c.backward = [&](const Tensor<D>& r) {
    BinaryGrads<D> g = mul_broadcast_backward(r, a, b);
    return Grads{g.a, g.b};
  };
  return check(name, c, kOpTolerance, perturb);
}

GradCheckReport concat_unit(bool perturb) {
  Rng rng(16);
  std::vector<Tensor<D>> parts{uniform({1, 2, 3, 3}, rng), uniform({1, 3, 3, 3}, rng)};
  GradCheckCase c;
  c.inputs = {{"part0", &parts[0]}, {"part1", &parts[1]}};
  c.forward = [&] { return concat_channels<D>(parts); };
  c.backward = [&](const Tensor<D>& r) {
    return Grads{slice_channels(r, 0, 2), slice_channels(r, 2, 3)};
  };
  return check("concat_channels", c, kOpTolerance, perturb);
}

GradCheckReport bce_unit(bool perturb) {
  Rng rng(17);
  Tensor<D> z = uniform({2, 1, 4, 4}, rng, -3.0, 3.0);
  Tensor<D> t({2, 1, 4, 4});
  for (D& v : t.data()) v = rng.uniform() < 0.3 ? 1.0 : 0.0;
  GradCheckCase c;
  c.inputs = {{"logits", &z}};
  c.forward = [&] { return Tensor<D>({1, 1, 1, 1}, bce_loss(z, t).value); };
  c.backward = [&](const Tensor<D>& r) {
    return Grads{scale(bce_loss(z, t).grad, r[0])};
  };
  return check("bce_loss", c, kOpTolerance, perturb);
}

// --- modules -----------------------------------------------------------

SpatialAttention<D> make_sa(Rng& rng) {
  SpatialAttention<D> sa("sa", SpatialAttentionConfig{4, 2, 7, 7, Activation::kRelu});
  init_perturbed(sa, rng);
  return sa;
}

GradCheckReport sa_unit(const std::string& name, bool perturb) {
  Rng rng(21);
  SpatialAttention<D> sa = make_sa(rng);
  Tensor<D> x = uniform({1, 4, 6, 6}, rng);
  using SA = SpatialAttention<D>;

  if (name == "sa_forward") {
    GradCheckCase c = module_case(
        x, params_of(sa),
        [&] { return sa.forward(x, Mode::kTrain, nullptr); },
        [&](const Tensor<D>& r) {
          SA::Cache cache;
          sa.forward(x, Mode::kTrain, &cache);
          return sa.backward(r, cache);
        });
    return check(name, c, kModuleTolerance, perturb);
  }
  if (name == "sa_extract") {
    std::vector<Param<D>*> ps;
    for (auto& b : sa.branches) {
      for (auto* net : {&b.spatial, &b.pointwise}) {
        for (Param<D>* p : params_of(*net)) ps.push_back(p);
      }
      for (Param<D>* p : params_of(b.norm)) ps.push_back(p);
    }
    GradCheckCase c = module_case(
        x, ps,
        [&] { return concat_channels<D>(sa.extract(x, Mode::kTrain, nullptr)); },
        [&](const Tensor<D>& r) {
          SA::ExtractCache cache;
          sa.extract(x, Mode::kTrain, &cache);
          return sa.extract_backward(split_channels(r, 2), cache);
        });
    return check(name, c, kModuleTolerance, perturb);
  }
  if (name == "sa_transform") {
    std::vector<Tensor<D>> feats{uniform({1, 4, 6, 6}, rng), uniform({1, 4, 6, 6}, rng)};
    std::vector<Param<D>*> ps;
    for (auto& b : sa.branches) {
      for (Param<D>* p : params_of(b.transform)) ps.push_back(p);
    }
    GradCheckCase c;
    c.inputs = {{"feature0", &feats[0]}, {"feature1", &feats[1]}};
    for (Param<D>* p : ps) c.inputs.push_back({p->name, &p->value});
    c.forward = [&] { return sa.transform(feats, nullptr).joined; };
    c.backward = [&](const Tensor<D>& r) {
      for (Param<D>* p : ps) p->zero_grad();
      SA::TransformCache cache;
      sa.transform(feats, &cache);
      Grads g = sa.transform_backward({}, &r, cache);
      for (Param<D>* p : ps) g.push_back(p->grad);
      return g;
    };
    return check(name, c, kModuleTolerance, perturb);
  }
  if (name == "sa_attention") {
    Tensor<D> joined = uniform({1, 4, 6, 6}, rng);
    GradCheckCase c = module_case(
        joined, params_of(sa.attention_conv),
        [&] { return sa.attention(joined, nullptr); },
        [&](const Tensor<D>& r) {
          SA::AttentionCache cache;
          sa.attention(joined, &cache);
          return sa.attention_backward(r, cache);
        });
    return check(name, c, kModuleTolerance, perturb);
  }
  // sa_fuse
  std::vector<Tensor<D>> parts{uniform({1, 2, 6, 6}, rng), uniform({1, 2, 6, 6}, rng)};
  Tensor<D> weights = uniform({1, 2, 6, 6}, rng, 0.05, 0.95);
  auto ps = params_of(sa.output_conv);
  GradCheckCase c;
  c.inputs = {{"x", &x}, {"part0", &parts[0]}, {"part1", &parts[1]}, {"weights", &weights}};
  for (Param<D>* p : ps) c.inputs.push_back({p->name, &p->value});
  c.forward = [&] { return sa.fuse(x, parts, weights, nullptr); };
  c.backward = [&](const Tensor<D>& r) {
    for (Param<D>* p : ps) p->zero_grad();
    SA::FuseCache cache;
    sa.fuse(x, parts, weights, &cache);
    SA::FuseGrads fg = sa.fuse_backward(r, cache);
    Grads g{fg.input, fg.parts[0], fg.parts[1], fg.weights};
    for (Param<D>* p : ps) g.push_back(p->grad);
    return g;
  };
  return check(name, c, kModuleTolerance, perturb);
}

GradCheckReport ca_unit(bool perturb) {
  Rng rng(22);
  ChannelAttention<D> ca("ca", ChannelAttentionConfig{8, 4, Activation::kRelu});
  init_perturbed(ca, rng);
  Tensor<D> x = uniform({2, 8, 4, 4}, rng);
  GradCheckCase c = module_case(
      x, params_of(ca),
      [&] { return ca.forward(x, Mode::kTrain, nullptr); },
      [&](const Tensor<D>& r) {
        ChannelAttention<D>::Cache cache;
        ca.forward(x, Mode::kTrain, &cache);
        return ca.backward(r, cache);
      });
  return check("ca_forward", c, kModuleTolerance, perturb);
}

GradCheckReport local_unit(bool perturb) {
  Rng rng(23);
  LocalMixer<D> mixer("local", 4);
  init_perturbed(mixer, rng);
  Tensor<D> x = uniform({2, 4, 6, 6}, rng);
  GradCheckCase c = module_case(
      x, params_of(mixer),
      [&] { return mixer.forward(x, Mode::kTrain, nullptr); },
      [&](const Tensor<D>& r) {
        LocalMixer<D>::Cache cache;
        mixer.forward(x, Mode::kTrain, &cache);
        return mixer.backward(r, cache);
      });
  return check("local_mixer", c, kModuleTolerance, perturb);
}

GradCheckReport block_unit(bool perturb) {
  Rng rng(24);
  BlockConfig cfg;
  cfg.channels = 4;
  cfg.branches = 2;
  cfg.max_size = 7;
  cfg.reduction = 2;
  MKSBlock<D> block("block", cfg);
  init_perturbed(block, rng);
  Tensor<D> x = uniform({1, 4, 6, 6}, rng);
  GradCheckCase c = module_case(
      x, params_of(block),
      [&] { return block.forward(x, Mode::kTrain, nullptr); },
      [&](const Tensor<D>& r) {
        MKSBlock<D>::Cache cache;
        block.forward(x, Mode::kTrain, &cache);
        return block.backward(r, cache);
      });
  return check("mks_block_forward", c, kModuleTolerance, perturb);
}

BackboneConfig small_backbone() {
  BackboneConfig cfg;
  cfg.in_channels = 3;
  cfg.patch = {2, 2, 4};
  cfg.stages = {{1, 4, 2, 5, 2, false}, {1, 8, 2, 5, 2, true}};
  cfg.layout = {true, true, true};
  return cfg;
}

GradCheckReport patch_unit(bool perturb) {
  Rng rng(25);
  Backbone<D> net(small_backbone());
  net.init(rng);
  std::vector<Param<D>*> ps = params_of(net.patch_conv);
  for (Param<D>* p : params_of(net.patch_norm)) ps.push_back(p);
  for (Param<D>* p : ps) {
    for (D& v : p->value.data()) v += rng.uniform(-0.3, 0.3);
  }
  Tensor<D> x = uniform({2, 3, 8, 8}, rng);
  GradCheckCase c = module_case(
      x, ps,
      [&] { return net.patch_embed(x, Mode::kTrain, nullptr); },
      [&](const Tensor<D>& r) {
        Backbone<D>::PatchCache cache;
        net.patch_embed(x, Mode::kTrain, &cache);
        return net.patch_embed_backward(r, cache);
      });
  return check("patch_embed", c, kModuleTolerance, perturb);
}

GradCheckReport model_unit(bool perturb) {
  Rng rng(26);
  Model<D> model(small_backbone());
  init_perturbed(model, rng);
  Tensor<D> x = uniform({2, 3, 8, 8}, rng);
  GradCheckCase c = module_case(
      x, model.params(),
      [&] { return model.forward(x, Mode::kTrain, nullptr); },
      [&](const Tensor<D>& r) {
        Model<D>::Cache cache;
        model.forward(x, Mode::kTrain, &cache);
        return model.backward(r, cache);
      });
  return check("backbone_head", c, kModuleTolerance, perturb);
}

std::vector<GradCheckUnit> build_units() {
  std::vector<GradCheckUnit> u;
  auto op = [&](std::string name, std::function<GradCheckReport(bool)> fn) {
    u.push_back({std::move(name), false, kOpTolerance, std::move(fn)});
  };
  auto mod = [&](std::string name, std::function<GradCheckReport(bool)> fn) {
    u.push_back({std::move(name), true, kModuleTolerance, std::move(fn)});
  };
  op("conv2d", [](bool p) {
    return conv_unit("conv2d", {1, 2, 6, 6}, ConvSpec::square(2, 3, 3, 1, 1, 1), p);
  });
  op("conv2d_strided", [](bool p) {
    return conv_unit("conv2d_strided", {1, 2, 7, 7}, ConvSpec::square(2, 3, 3, 2, 1, 1), p);
  });
  op("conv2d_dilated", [](bool p) {
    return conv_unit("conv2d_dilated", {1, 2, 8, 8}, ConvSpec::square(2, 2, 3, 1, 2, 2), p);
  });
  op("conv2d_grouped", [](bool p) {
    return conv_unit("conv2d_grouped", {1, 4, 6, 6}, ConvSpec::square(4, 4, 3, 1, 1, 1, 2), p);
  });
  op("conv2d_depthwise", [](bool p) {
    return conv_unit("conv2d_depthwise", {2, 3, 8, 8}, ConvSpec::depthwise(3, 5, 2, 4), p);
  });
  op("batchnorm", [](bool p) { return batchnorm_unit("batchnorm", Mode::kTrain, p); });
  op("batchnorm_eval", [](bool p) { return batchnorm_unit("batchnorm_eval", Mode::kEval, p); });
  for (const char* name : {"global_avg_pool", "global_max_pool", "channel_mean", "channel_max"}) {
    op(name, [name](bool p) { return pool_unit(name, p); });
  }
  op("fully_connected", fc_unit);
  op("sigmoid", [](bool p) {
    Rng rng(18);
    return unary_unit(
        "sigmoid", uniform({2, 3, 4, 4}, rng, -4.0, 4.0),
        [](const Tensor<D>& v) { return sigmoid(v); },
        [](const Tensor<D>& r, const Tensor<D>& v) { return sigmoid_backward(r, sigmoid(v)); },
        p);
  });
  op("relu", [](bool p) {
    Rng rng(19);
    return unary_unit(
        "relu", off_zero({2, 3, 4, 4}, rng),
        [](const Tensor<D>& v) { return relu(v); },
        [](const Tensor<D>& r, const Tensor<D>& v) { return relu_backward(r, v); }, p);
  });
  op("mul_broadcast", [](bool p) { return mul_unit("mul_broadcast", {2, 1, 4, 4}, p); });
  op("mul_broadcast_channel", [](bool p) {
    return mul_unit("mul_broadcast_channel", {2, 3, 1, 1}, p);
  });
  op("concat_channels", concat_unit);
  op("bce_loss", bce_unit);

  for (const char* name : {"sa_extract", "sa_transform", "sa_attention", "sa_fuse", "sa_forward"}) {
    mod(name, [name](bool p) { return sa_unit(name, p); });
  }
  mod("ca_forward", ca_unit);
  mod("local_mixer", local_unit);
  mod("mks_block_forward", block_unit);
  mod("patch_embed", patch_unit);
  mod("backbone_head", model_unit);
  return u;
}

}  // namespace

const std::vector<GradCheckUnit>& gradcheck_units() {
  static const std::vector<GradCheckUnit> units = build_units();
  return units;
}

std::vector<GradCheckReport> run_gradcheck(const std::string& scope, bool perturb) {
  std::vector<GradCheckReport> out;
  bool matched = false;
  for (const GradCheckUnit& u : gradcheck_units()) {
    const bool take = scope == "all" || (scope == "ops" && !u.is_module) ||
                      (scope == "modules" && u.is_module) || scope == u.name;
    if (!take) continue;
    matched = true;
    out.push_back(u.run(perturb));
  }
  if (!matched) throw ConfigError("scope", "unknown gradcheck scope '" + scope + "'");
  return out;
}

}  // namespace mks

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

#include "mks/train.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "mks/error.hpp"
#include "mks/loss.hpp"
#include "mks/metrics.hpp"
#include "mks/synthetic.hpp"

namespace mks {
namespace {

enum StreamKey : std::uint64_t {
  kTrainData = 1,
  kValData = 2,
  kInit = 3,
  kShuffle = 4,
};

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10f", v);
  return buf;
}

}  // namespace

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kBase: return "Base";
    case Variant::kBaseSA: return "Base+SA";
    case Variant::kBaseCA: return "Base+CA";
    case Variant::kBaseSACA: return "Base+SA+CA";
    case Variant::kMks: return "MKS";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  const std::string n = lower(name);
  for (Variant v : {Variant::kBase, Variant::kBaseSA, Variant::kBaseCA,
                    Variant::kBaseSACA, Variant::kMks}) {
    if (n == lower(variant_name(v))) return v;
  }
  if (n == "base+ca+sa") return Variant::kBaseSACA;
  throw ConfigError("variant", "unknown variant '" + std::string(name) + "'");
}

BlockLayout variant_layout(Variant v) {
  switch (v) {
    case Variant::kBase: return {true, false, false};
    case Variant::kBaseSA: return {true, false, true};
    case Variant::kBaseCA: return {true, true, false};
    case Variant::kBaseSACA: return {true, true, true};
    case Variant::kMks: return {false, true, true};
  }
  return {};
}

BackboneConfig with_variant(BackboneConfig config, Variant v) {
  config.layout = variant_layout(v);
  return config;
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train.epochs", "must be >= 0");
  if (batch < 1) throw ConfigError("train.batch", "must be >= 1");
  if (train_samples < 1) throw ConfigError("train.train_samples", "must be >= 1");
  if (val_samples < 1) throw ConfigError("train.val_samples", "must be >= 1");
  if (image_size < 1) throw ConfigError("train.image_size", "must be >= 1");
  if (!(optimizer.lr > 0) || !std::isfinite(optimizer.lr)) {
    throw ConfigError("train.lr", "must be positive");
  }
  if (!(optimizer.beta1 >= 0 && optimizer.beta1 < 1)) {
    throw ConfigError("train.beta1", "must be in [0, 1)");
  }
  if (!(optimizer.beta2 >= 0 && optimizer.beta2 < 1)) {
    throw ConfigError("train.beta2", "must be in [0, 1)");
  }
  if (!(optimizer.weight_decay >= 0) || optimizer.lr * optimizer.weight_decay >= 1) {
    throw ConfigError("train.weight_decay", "must be >= 0 with lr * wd < 1");
  }
  if (!(optimizer.eps > 0)) throw ConfigError("train.eps", "must be positive");
}

EpochMetrics evaluate(const Model<float>& model,
                      std::span<const SyntheticSample> samples,
                      std::int64_t batch) {
  std::vector<ScoredPrediction> preds;
  std::int64_t positives = 0;
  double loss_sum = 0.0;
  std::int64_t cells = 0;
  const auto n = static_cast<std::int64_t>(samples.size());
  std::vector<std::int64_t> idx;
  for (std::int64_t start = 0; start < n; start += batch) {
    idx.clear();
    for (std::int64_t i = start; i < std::min(n, start + batch); ++i) idx.push_back(i);
    const Batch b = make_batch(samples, idx);
    const Tensor<float> logits = model.forward(b.images, Mode::kEval, nullptr);
    const auto loss = bce_loss(logits, b.targets);
    loss_sum += loss.value * static_cast<double>(logits.numel());
    cells += logits.numel();
    for (std::int64_t i = 0; i < logits.numel(); ++i) {
      const double z = logits[i];
      const double score = z >= 0 ? 1.0 / (1.0 + std::exp(-z))
                                  : std::exp(z) / (1.0 + std::exp(z));
      const bool pos = b.targets[i] > 0.5F;
      positives += pos ? 1 : 0;
      preds.push_back({score, pos});
    }
  }
  EpochMetrics m;
  m.loss = loss_sum / static_cast<double>(cells);
  m.ap = positives > 0 ? average_precision(pr_curve(preds, positives)).ap : 0.0;
  return m;
}

TrainResult train(const BackboneConfig& model_config, const TrainConfig& config,
                  Variant variant, std::uint64_t seed,
                  const EpochCallback& on_epoch) {
  config.validate();
  const BackboneConfig mc = with_variant(model_config, variant);
  mc.validate();
  mc.check_input_size(config.image_size, config.image_size);
  const std::int64_t cell = mc.total_stride();

  const Rng root(seed);
  const auto train_set = gen_synthetic(root.fork(kTrainData).next_u64(),
                                       config.train_samples, config.image_size,
                                       config.image_size, cell);
  const auto val_set = gen_synthetic(root.fork(kValData).next_u64(),
                                     config.val_samples, config.image_size,
                                     config.image_size, cell);

  TrainResult result;
  result.model = std::make_unique<Model<float>>(mc, root.fork(kInit).next_u64());
  Model<float>& model = *result.model;
  AdamW<float> opt(model.params(), config.optimizer);

  const std::int64_t steps_per_epoch =
      (config.train_samples + config.batch - 1) / config.batch;
  const std::int64_t total_steps = steps_per_epoch * config.epochs;

  auto record = [&](EpochMetrics m) {
    result.history.push_back(m);
    if (on_epoch) on_epoch(m);
  };
  EpochMetrics init = evaluate(model, val_set, config.batch);
  init.epoch = 0;
  record(init);

  std::vector<std::int64_t> order(static_cast<std::size_t>(config.train_samples));
  std::int64_t step = 0;
  typename Model<float>::Cache cache;
  for (std::int64_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle = root.fork(kShuffle).fork(static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(shuffle.below(i));
      std::swap(order[i - 1], order[j]);
    }
    for (std::int64_t s = 0; s < steps_per_epoch; ++s) {
      const auto first = order.begin() + s * config.batch;
      const auto last = order.begin() + std::min(config.train_samples, (s + 1) * config.batch);
      const std::vector<std::int64_t> idx(first, last);
      const Batch b = make_batch(train_set, idx);
      opt.set_lr(config.cosine ? cosine_lr(config.optimizer.lr, step, total_steps)
                               : config.optimizer.lr);
      model.zero_grad();
      const Tensor<float> logits = model.forward(b.images, Mode::kTrain, &cache);
      const auto loss = bce_loss(logits, b.targets);
      model.backward(loss.grad, cache);
      opt.step();
      ++step;
    }
    EpochMetrics m = evaluate(model, val_set, config.batch);
    m.epoch = epoch;
    record(m);
  }
  return result;
}

void write_history_csv(std::ostream& out,
                       const std::vector<EpochMetrics>& history) {
  out << "epoch,loss,ap\n";
  for (const EpochMetrics& m : history) {
    out << m.epoch << ',' << fmt(m.loss) << ',' << fmt(m.ap) << '\n';
  }
}

const VariantResult& AblationReport::at(Variant v) const {
  const std::string name = variant_name(v);
  for (const VariantResult& r : variants) {
    if (r.name == name) return r;
  }
  throw Error("ablation report has no variant " + name);
}

AblationReport ablation_run(const BackboneConfig& model_config,
                            const TrainConfig& config,
                            const std::vector<std::uint64_t>& seeds,
                            const RunCallback& on_epoch) {
  if (seeds.empty()) throw Error("ablation_run: at least one seed is required");
  AblationReport report;
  report.seeds = seeds;
  for (Variant v : kAblationVariants) {
    VariantResult r;
    r.name = variant_name(v);
    for (std::uint64_t seed : seeds) {
      EpochCallback cb;
      if (on_epoch) cb = [&](const EpochMetrics& m) { on_epoch(v, seed, m); };
      const TrainResult t = train(model_config, config, v, seed, cb);
      r.final_ap.push_back(t.history.back().ap);
    }
    r.mean_ap = std::accumulate(r.final_ap.begin(), r.final_ap.end(), 0.0) /
                static_cast<double>(r.final_ap.size());
    report.variants.push_back(std::move(r));
  }
  const double base = report.variants.front().mean_ap;
  for (VariantResult& r : report.variants) r.delta_vs_base = r.mean_ap - base;
  return report;
}

void write_ablation_csv(std::ostream& out, const AblationReport& report) {
  out << "variant,final_ap,delta_vs_base";
  for (std::uint64_t s : report.seeds) out << ",ap_seed_" << s;
  out << '\n';
  for (const VariantResult& r : report.variants) {
    out << r.name << ',' << fmt(r.mean_ap) << ',' << fmt(r.delta_vs_base);
    for (double ap : r.final_ap) out << ',' << fmt(ap);
    out << '\n';
  }
}

}  // namespace mks

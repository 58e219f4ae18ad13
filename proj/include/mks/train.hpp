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

#ifndef MKS_TRAIN_HPP_
#define MKS_TRAIN_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "mks/backbone.hpp"
#include "mks/optim.hpp"

namespace mks {

struct SyntheticSample;

// Base keeps only the local mixer; +SA / +CA add one attention module each.
// kMks is the attention-only block used by the default backbone.
enum class Variant { kBase, kBaseSA, kBaseCA, kBaseSACA, kMks };

inline constexpr Variant kAblationVariants[] = {
    Variant::kBase, Variant::kBaseSA, Variant::kBaseCA, Variant::kBaseSACA};

std::string variant_name(Variant v);
// Case-insensitive; throws ConfigError("variant", ...) for unknown names.
Variant parse_variant(std::string_view name);
BlockLayout variant_layout(Variant v);
BackboneConfig with_variant(BackboneConfig config, Variant v);

struct TrainConfig {
  std::int64_t epochs = 30;
  std::int64_t batch = 8;
  std::int64_t train_samples = 512;
  std::int64_t val_samples = 128;
  std::int64_t image_size = 64;
  AdamWOptions optimizer;
  bool cosine = true;

  // Throws ConfigError naming the field.
  void validate() const;
};

struct EpochMetrics {
  std::int64_t epoch = 0;  // 0 is the untrained model
  double loss = 0.0;       // validation BCE
  double ap = 0.0;         // validation cell AP
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  std::unique_ptr<Model<float>> model;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Data, initialization and batch order all derive from seed.
TrainResult train(const BackboneConfig& model_config, const TrainConfig& config,
                  Variant variant, std::uint64_t seed,
                  const EpochCallback& on_epoch = {});

// Validation BCE and AP of a model over samples.
EpochMetrics evaluate(const Model<float>& model,
                      std::span<const SyntheticSample> samples,
                      std::int64_t batch);

void write_history_csv(std::ostream& out,
                       const std::vector<EpochMetrics>& history);

struct VariantResult {
  std::string name;
  std::vector<double> final_ap;  // one per seed
  double mean_ap = 0.0;
  double delta_vs_base = 0.0;
};

struct AblationReport {
  std::vector<VariantResult> variants;  // Base, Base+SA, Base+CA, Base+SA+CA
  std::vector<std::uint64_t> seeds;

  const VariantResult& at(Variant v) const;
};

using RunCallback = std::function<void(Variant, std::uint64_t seed,
                                       const EpochMetrics&)>;

// Throws Error when seeds is empty.
AblationReport ablation_run(const BackboneConfig& model_config,
                            const TrainConfig& config,
                            const std::vector<std::uint64_t>& seeds,
                            const RunCallback& on_epoch = {});

void write_ablation_csv(std::ostream& out, const AblationReport& report);

}  // namespace mks

#endif  // MKS_TRAIN_HPP_

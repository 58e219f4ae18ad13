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

#include <cmath>
#include <sstream>

#include "gtest/gtest.h"
#include "mks/error.hpp"
#include "mks/train.hpp"

namespace mks {
namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.epochs = 2;
  c.train_samples = 24;
  c.val_samples = 16;
  c.image_size = 32;
  c.batch = 8;
  return c;
}

TEST(Train, HistoryIsBitDeterministic) {
  const TrainResult a = train(BackboneConfig::tiny(), small_config(), Variant::kBaseSACA, 5);
  const TrainResult b = train(BackboneConfig::tiny(), small_config(), Variant::kBaseSACA, 5);
  ASSERT_EQ(a.history.size(), 3u);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].epoch, static_cast<std::int64_t>(i));
    EXPECT_EQ(a.history[i].loss, b.history[i].loss);
    EXPECT_EQ(a.history[i].ap, b.history[i].ap);
  }
  std::ostringstream ca, cb;
  write_history_csv(ca, a.history);
  write_history_csv(cb, b.history);
  EXPECT_EQ(ca.str(), cb.str());
  EXPECT_EQ(ca.str().rfind("epoch,loss,ap\n", 0), 0u);
}

TEST(Train, DifferentSeedsDiffer) {
  const TrainResult a = train(BackboneConfig::tiny(), small_config(), Variant::kBase, 1);
  const TrainResult b = train(BackboneConfig::tiny(), small_config(), Variant::kBase, 2);
  EXPECT_NE(a.history.back().loss, b.history.back().loss);
}

TEST(Train, FirstEpochLowersLoss) {
  TrainConfig c = small_config();
  c.epochs = 1;
  c.train_samples = 128;
  c.val_samples = 32;
  c.image_size = 64;
  for (Variant v : kAblationVariants) {
    const TrainResult r = train(BackboneConfig::tiny(), c, v, 3);
    ASSERT_EQ(r.history.size(), 2u);
    EXPECT_LT(r.history[1].loss, r.history[0].loss) << variant_name(v);
    EXPECT_GE(r.history[1].ap, 0.0);
    EXPECT_LE(r.history[1].ap, 1.0);
  }
}

TEST(Train, CallbackSeesEveryEpoch) {
  std::vector<std::int64_t> seen;
  train(BackboneConfig::tiny(), small_config(), Variant::kMks, 1,
        [&](const EpochMetrics& m) { seen.push_back(m.epoch); });
  EXPECT_EQ(seen, (std::vector<std::int64_t>{0, 1, 2}));
}

TEST(Train, RejectsInvalidConfig) {
  TrainConfig c = small_config();
  c.batch = 0;
  EXPECT_THROW(train(BackboneConfig::tiny(), c, Variant::kBase, 1), ConfigError);
  c = small_config();
  c.image_size = 40;
  EXPECT_THROW(train(BackboneConfig::tiny(), c, Variant::kBase, 1), ShapeError);
}

TEST(Ablation, ReportHasFourVariantsWithDeltas) {
  TrainConfig c = small_config();
  c.epochs = 1;
  const AblationReport r = ablation_run(BackboneConfig::tiny(), c, {1, 2});
  ASSERT_EQ(r.variants.size(), 4u);
  const char* names[] = {"Base", "Base+SA", "Base+CA", "Base+SA+CA"};
  const double base = r.variants[0].mean_ap;
  for (std::size_t i = 0; i < 4; ++i) {
    const VariantResult& v = r.variants[i];
    EXPECT_EQ(v.name, names[i]);
    ASSERT_EQ(v.final_ap.size(), 2u);
    EXPECT_DOUBLE_EQ(v.mean_ap, 0.5 * (v.final_ap[0] + v.final_ap[1]));
    EXPECT_DOUBLE_EQ(v.delta_vs_base, v.mean_ap - base);
  }
  EXPECT_EQ(r.variants[0].delta_vs_base, 0.0);
  EXPECT_EQ(&r.at(Variant::kBaseCA), &r.variants[2]);
  EXPECT_EQ(r.seeds, (std::vector<std::uint64_t>{1, 2}));

  std::ostringstream csv;
  write_ablation_csv(csv, r);
  EXPECT_EQ(csv.str().rfind("variant,final_ap,delta_vs_base,ap_seed_1,ap_seed_2\n", 0), 0u);
}

TEST(Ablation, RequiresSeeds) {
  EXPECT_THROW(ablation_run(BackboneConfig::tiny(), small_config(), {}), Error);
}

TEST(Variants, NamesAndLayouts) {
  for (Variant v : kAblationVariants) {
    EXPECT_EQ(parse_variant(variant_name(v)), v);
    EXPECT_TRUE(variant_layout(v).local);
  }
  EXPECT_EQ(parse_variant("base+sa+ca"), Variant::kBaseSACA);
  EXPECT_EQ(variant_layout(Variant::kBaseSA), (BlockLayout{true, false, true}));
  EXPECT_EQ(variant_layout(Variant::kBaseCA), (BlockLayout{true, true, false}));
  EXPECT_EQ(variant_layout(Variant::kMks), (BlockLayout{false, true, true}));
  try {
    parse_variant("Huge");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "variant");
  }
}

}  // namespace
}  // namespace mks

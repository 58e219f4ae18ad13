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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "mks/mks.h"

namespace mks {
namespace {

namespace fs = std::filesystem;

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mks_capi_test";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Small enough to train in seconds.
mks_config* small_config() {
  mks_config* c = nullptr;
  EXPECT_EQ(mks_config_default(&c), MKS_OK);
  EXPECT_EQ(mks_config_set(c, "train", "epochs", "1"), MKS_OK);
  EXPECT_EQ(mks_config_set(c, "train", "train_samples", "16"), MKS_OK);
  EXPECT_EQ(mks_config_set(c, "train", "val_samples", "8"), MKS_OK);
  EXPECT_EQ(mks_config_set(c, "train", "image_size", "32"), MKS_OK);
  return c;
}

TEST(CApi, VersionAndStatusNames) {
  EXPECT_STRNE(mks_version(), "");
  EXPECT_STREQ(mks_status_name(MKS_OK), "ok");
  EXPECT_STREQ(mks_status_name(MKS_ERR_CONFIG), "config");
}

TEST(CApi, NullHandlesAreArgumentErrors) {
  int64_t shape[4] = {};
  EXPECT_EQ(mks_tensor_shape(nullptr, shape), MKS_ERR_ARGUMENT);
  EXPECT_EQ(mks_config_validate(nullptr), MKS_ERR_ARGUMENT);
  EXPECT_EQ(mks_model_create(nullptr, 1, nullptr), MKS_ERR_ARGUMENT);
  EXPECT_STRNE(mks_last_error(), "");
  mks_tensor_free(nullptr);
  mks_model_free(nullptr);
  mks_config_free(nullptr);
}

TEST(CApi, ConfigErrorNamesField) {
  mks_config* c = nullptr;
  ASSERT_EQ(mks_config_default(&c), MKS_OK);
  EXPECT_EQ(mks_config_set(c, "train", "epochs", "many"), MKS_ERR_CONFIG);
  EXPECT_STREQ(mks_last_error_field(), "train.epochs");
  EXPECT_EQ(mks_config_set(c, "model", "channels", "32, 64, 16"), MKS_OK);
  EXPECT_EQ(mks_config_validate(c), MKS_ERR_CONFIG);
  EXPECT_STREQ(mks_last_error_field(), "model.channels[2]");
  mks_config_free(c);

  const fs::path bad = temp_path("bad.ini");
  std::ofstream(bad) << "[model]\nS = 3\n";
  EXPECT_EQ(mks_config_load(bad.c_str(), &c), MKS_ERR_CONFIG);
  EXPECT_STREQ(mks_last_error_field(), "model.S");
}

TEST(CApi, ConfigStringsAndSaveLoad) {
  mks_config* c = nullptr;
  ASSERT_EQ(mks_config_default(&c), MKS_OK);
  ASSERT_EQ(mks_config_set(c, "io", "out_dir", "results"), MKS_OK);
  size_t needed = 0;
  ASSERT_EQ(mks_config_get_string(c, "io", "out_dir", nullptr, 0, &needed), MKS_OK);
  EXPECT_EQ(needed, 8u);
  std::vector<char> buf(needed);
  ASSERT_EQ(mks_config_get_string(c, "io", "out_dir", buf.data(), buf.size(), nullptr),
            MKS_OK);
  EXPECT_STREQ(buf.data(), "results");
  EXPECT_EQ(mks_config_get_string(c, "train", "lr", nullptr, 0, &needed), MKS_ERR_ARGUMENT);

  const fs::path p = temp_path("run.ini");
  ASSERT_EQ(mks_config_save(c, p.c_str()), MKS_OK);
  mks_config* back = nullptr;
  ASSERT_EQ(mks_config_load(p.c_str(), &back), MKS_OK);
  const fs::path p2 = temp_path("run2.ini");
  ASSERT_EQ(mks_config_save(back, p2.c_str()), MKS_OK);
  EXPECT_EQ(slurp(p), slurp(p2));
  mks_config_free(back);
  mks_config_free(c);
}

TEST(CApi, TensorRoundTripIsBitIdentical) {
  const int64_t shape[4] = {2, 3, 4, 5};
  for (mks_dtype dt : {MKS_F32, MKS_F64}) {
    mks_tensor* t = nullptr;
    ASSERT_EQ(mks_tensor_random(shape, dt, 7, &t), MKS_OK);
    const fs::path p = temp_path("t.mkst");
    ASSERT_EQ(mks_tensor_save(t, p.c_str()), MKS_OK);
    mks_tensor* back = nullptr;
    ASSERT_EQ(mks_tensor_load(p.c_str(), &back), MKS_OK);
    int equal = 0;
    ASSERT_EQ(mks_tensor_equal(t, back, &equal), MKS_OK);
    EXPECT_EQ(equal, 1);
    mks_dtype got{};
    ASSERT_EQ(mks_tensor_dtype(back, &got), MKS_OK);
    EXPECT_EQ(got, dt);
    mks_tensor_free(back);
    mks_tensor_free(t);
  }
}

TEST(CApi, TensorReadWrite) {
  const int64_t shape[4] = {1, 1, 2, 2};
  mks_tensor* t = nullptr;
  ASSERT_EQ(mks_tensor_create(shape, MKS_F64, &t), MKS_OK);
  const double in[4] = {1.0, -2.5, 0.125, 3.0};
  ASSERT_EQ(mks_tensor_write(t, in, 4), MKS_OK);
  double out[4] = {};
  ASSERT_EQ(mks_tensor_read(t, out, 4), MKS_OK);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(out[i], in[i]);
  EXPECT_EQ(mks_tensor_read(t, out, 3), MKS_ERR_SHAPE);
  const int64_t bad[4] = {1, 0, 2, 2};
  mks_tensor* u = nullptr;
  EXPECT_NE(mks_tensor_create(bad, MKS_F32, &u), MKS_OK);
  mks_tensor_free(t);
}

TEST(CApi, CorruptTensorFileIsFormatError) {
  const fs::path p = temp_path("corrupt.mkst");
  std::ofstream(p, std::ios::binary) << "MKSX";
  mks_tensor* t = nullptr;
  EXPECT_EQ(mks_tensor_load(p.c_str(), &t), MKS_ERR_FORMAT);
  EXPECT_EQ(t, nullptr);
}

TEST(CApi, ModelWeightsRoundTrip) {
  mks_config* c = nullptr;
  ASSERT_EQ(mks_config_default(&c), MKS_OK);
  mks_model* a = nullptr;
  mks_model* b = nullptr;
  ASSERT_EQ(mks_model_create(c, 1, &a), MKS_OK);
  ASSERT_EQ(mks_model_create(c, 2, &b), MKS_OK);
  int equal = 1;
  ASSERT_EQ(mks_model_equal(a, b, &equal), MKS_OK);
  EXPECT_EQ(equal, 0);

  const fs::path p = temp_path("w.mksw");
  ASSERT_EQ(mks_model_save(a, p.c_str()), MKS_OK);
  ASSERT_EQ(mks_model_load(b, p.c_str()), MKS_OK);
  ASSERT_EQ(mks_model_equal(a, b, &equal), MKS_OK);
  EXPECT_EQ(equal, 1);

  const int64_t shape[4] = {1, 3, 32, 32};
  mks_tensor* x = nullptr;
  ASSERT_EQ(mks_tensor_random(shape, MKS_F32, 3, &x), MKS_OK);
  mks_tensor* ya = nullptr;
  mks_tensor* yb = nullptr;
  ASSERT_EQ(mks_model_forward(a, x, &ya), MKS_OK);
  ASSERT_EQ(mks_model_forward(b, x, &yb), MKS_OK);
  int64_t s[4] = {};
  ASSERT_EQ(mks_tensor_shape(ya, s), MKS_OK);
  EXPECT_EQ(s[0], 1);
  EXPECT_EQ(s[1], 1);
  EXPECT_EQ(s[2], 2);
  EXPECT_EQ(s[3], 2);
  ASSERT_EQ(mks_tensor_equal(ya, yb, &equal), MKS_OK);
  EXPECT_EQ(equal, 1);

  int64_t count = 0;
  ASSERT_EQ(mks_model_param_count(a, &count), MKS_OK);
  EXPECT_GT(count, 0);
  mks_tensor* w = nullptr;
  ASSERT_EQ(mks_model_param(a, "stage0.block0.sa.branch1.spatial.weight", &w), MKS_OK);
  ASSERT_EQ(mks_tensor_shape(w, s), MKS_OK);
  EXPECT_EQ(s[2], 7);
  EXPECT_EQ(mks_model_param(a, "no.such.param", &w), MKS_ERR_ARGUMENT);

  mks_config* other = nullptr;
  ASSERT_EQ(mks_config_default(&other), MKS_OK);
  ASSERT_EQ(mks_config_set(other, "model", "variant", "base"), MKS_OK);
  mks_model* m = nullptr;
  ASSERT_EQ(mks_model_create(other, 1, &m), MKS_OK);
  EXPECT_EQ(mks_model_load(m, p.c_str()), MKS_ERR_FORMAT);

  for (mks_tensor* t : {x, ya, yb, w}) mks_tensor_free(t);
  for (mks_model* mm : {a, b, m}) mks_model_free(mm);
  mks_config_free(other);
  mks_config_free(c);
}

TEST(CApi, AveragePrecision) {
  const double scores[3] = {0.9, 0.8, 0.7};
  const int labels[3] = {1, 0, 1};
  double ap = 0.0;
  ASSERT_EQ(mks_average_precision(scores, labels, 3, &ap), MKS_OK);
  EXPECT_NEAR(ap, 5.0 / 6.0, 1e-12);
  const int none[3] = {0, 0, 0};
  EXPECT_NE(mks_average_precision(scores, none, 3, &ap), MKS_OK);
  const fs::path p = temp_path("hand.txt");
  std::ofstream(p) << "0.9 1\n0.8 0\n0.7 1\n";
  ASSERT_EQ(mks_eval_ap_file(p.c_str(), &ap), MKS_OK);
  EXPECT_NEAR(ap, 5.0 / 6.0, 1e-12);
}

TEST(CApi, GradcheckScopesAndNegativeControl) {
  size_t units = 0;
  ASSERT_EQ(mks_gradcheck_unit_count(&units), MKS_OK);
  ASSERT_GT(units, 0u);
  EXPECT_STRNE(mks_gradcheck_unit_name(0), "");
  EXPECT_EQ(mks_gradcheck_unit_name(units), nullptr);

  int seen = 0;
  int passed = 0;
  ASSERT_EQ(mks_gradcheck(
                "sa_fuse", 0,
                [](const mks_gradcheck_result* r, void* user) {
                  EXPECT_STREQ(r->unit, "sa_fuse");
                  EXPECT_LT(r->max_rel_error, r->tolerance);
                  ++*static_cast<int*>(user);
                },
                &seen, &passed),
            MKS_OK);
  EXPECT_EQ(seen, 1);
  EXPECT_EQ(passed, 1);
  ASSERT_EQ(mks_gradcheck("sa_fuse", 1, nullptr, nullptr, &passed), MKS_OK);
  EXPECT_EQ(passed, 0);
  EXPECT_EQ(mks_gradcheck("bogus", 0, nullptr, nullptr, &passed), MKS_ERR_ARGUMENT);
}

TEST(CApi, TrainTwiceGivesIdenticalCsv) {
  mks_config* c = small_config();
  const fs::path p1 = temp_path("m1.csv");
  const fs::path p2 = temp_path("m2.csv");
  std::vector<int64_t> epochs;
  mks_model* m = nullptr;
  ASSERT_EQ(mks_train(c, p1.c_str(),
                      [](int64_t epoch, double, double, void* user) {
                        static_cast<std::vector<int64_t>*>(user)->push_back(epoch);
                      },
                      &epochs, &m),
            MKS_OK);
  ASSERT_EQ(mks_train(c, p2.c_str(), nullptr, nullptr, nullptr), MKS_OK);
  EXPECT_EQ(epochs, (std::vector<int64_t>{0, 1}));
  ASSERT_NE(m, nullptr);
  EXPECT_EQ(slurp(p1), slurp(p2));
  EXPECT_EQ(slurp(p1).rfind("epoch,loss,ap\n", 0), 0u);
  mks_model_free(m);
  mks_config_free(c);
}

TEST(CApi, ErfProbes) {
  mks_config* c = nullptr;
  ASSERT_EQ(mks_config_default(&c), MKS_OK);
  mks_erf_summary block{};
  mks_erf_summary conv{};
  ASSERT_EQ(mks_erf(c, MKS_ERF_BLOCK, 33, 2, 1, nullptr, nullptr, &block), MKS_OK);
  ASSERT_EQ(mks_erf(c, MKS_ERF_CONV3, 33, 2, 1, nullptr, nullptr, &conv), MKS_OK);
  EXPECT_EQ(conv.support_height, 3);
  EXPECT_GE(block.support_height, 13);
  EXPECT_GT(block.radius95, conv.radius95);
  mks_config_free(c);
}

TEST(CApi, BenchReportsTable) {
  mks_config* c = nullptr;
  ASSERT_EQ(mks_config_default(&c), MKS_OK);
  std::string text;
  mks_bench_summary s{};
  ASSERT_EQ(mks_bench(c, 1,
                      [](const char* t, void* user) { *static_cast<std::string*>(user) += t; },
                      &text, &s),
            MKS_OK);
  EXPECT_GT(s.total_params, 0);
  EXPECT_GT(s.total_flops, 0);
  EXPECT_GT(s.forward_median_ms, 0.0);
  EXPECT_NE(text.find("stage0.block0"), std::string::npos);
  mks_config_free(c);
}

}  // namespace
}  // namespace mks

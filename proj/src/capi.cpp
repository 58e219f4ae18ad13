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

#include "mks/mks.h"

#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "mks/backbone.hpp"
#include "mks/bench.hpp"
#include "mks/block.hpp"
#include "mks/config.hpp"
#include "mks/erf.hpp"
#include "mks/error.hpp"
#include "mks/gradcheck_suite.hpp"
#include "mks/metrics.hpp"
#include "mks/rng.hpp"
#include "mks/tensor_io.hpp"
#include "mks/train.hpp"
#include "mks/weights_io.hpp"

struct mks_config {
  mks::RunConfig value;
};

struct mks_model {
  std::unique_ptr<mks::Model<float>> value;
};

struct mks_tensor {
  mks::AnyTensor value;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_error_field;

mks_status fail(mks_status status, const std::string& message,
                const std::string& field = {}) {
  g_error = message;
  g_error_field = field;
  return status;
}

// Runs fn, translating exceptions into status codes.
template <typename Fn>
mks_status guarded(Fn&& fn) {
  g_error.clear();
  g_error_field.clear();
  try {
    return fn();
  } catch (const mks::ConfigError& e) {
    return fail(MKS_ERR_CONFIG, e.what(), e.field());
  } catch (const mks::ShapeError& e) {
    return fail(MKS_ERR_SHAPE, e.what());
  } catch (const mks::SpecError& e) {
    return fail(MKS_ERR_SPEC, e.what());
  } catch (const mks::FormatError& e) {
    return fail(MKS_ERR_FORMAT, e.what());
  } catch (const std::exception& e) {
    return fail(MKS_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MKS_ERR_INTERNAL, "unknown exception");
  }
}

mks_status null_argument(const char* name) {
  return fail(MKS_ERR_ARGUMENT, std::string(name) + " must not be NULL");
}

mks::Shape to_shape(const int64_t shape[4]) {
  return {shape[0], shape[1], shape[2], shape[3]};
}

mks::BackboneConfig model_config(const mks::RunConfig& c) {
  return mks::with_variant(c.model, c.variant);
}

template <typename T>
bool bits_equal(const mks::Tensor<T>& a, const mks::Tensor<T>& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.ptr(), b.ptr(),
                     static_cast<std::size_t>(a.numel()) * sizeof(T)) == 0;
}

void write_text_file(const char* path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw mks::FormatError(std::string("cannot open ") + path);
  out << text;
  if (!out) throw mks::FormatError(std::string("cannot write ") + path);
}

}  // namespace

extern "C" {

const char* mks_version(void) { return "1.0.0"; }

const char* mks_status_name(mks_status status) {
  switch (status) {
    case MKS_OK: return "ok";
    case MKS_ERR_ARGUMENT: return "argument";
    case MKS_ERR_CONFIG: return "config";
    case MKS_ERR_SHAPE: return "shape";
    case MKS_ERR_SPEC: return "spec";
    case MKS_ERR_FORMAT: return "format";
    case MKS_ERR_CHECK: return "check";
    case MKS_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* mks_last_error(void) { return g_error.c_str(); }

const char* mks_last_error_field(void) { return g_error_field.c_str(); }

// Configuration

mks_status mks_config_default(mks_config** out) {
  if (!out) return null_argument("out");
  return guarded([&] {
    *out = new mks_config{};
    return MKS_OK;
  });
}

mks_status mks_config_load(const char* path, mks_config** out) {
  if (!path) return null_argument("path");
  if (!out) return null_argument("out");
  return guarded([&] {
    auto c = std::make_unique<mks_config>(mks_config{mks::load_config(path)});
    *out = c.release();
    return MKS_OK;
  });
}

mks_status mks_config_set(mks_config* config, const char* section,
                          const char* key, const char* value) {
  if (!config) return null_argument("config");
  if (!section || !key || !value) return null_argument("section/key/value");
  return guarded([&] {
    mks::set_config_value(config->value, section, key, value);
    return MKS_OK;
  });
}

mks_status mks_config_validate(const mks_config* config) {
  if (!config) return null_argument("config");
  return guarded([&] {
    config->value.validate();
    return MKS_OK;
  });
}

mks_status mks_config_save(const mks_config* config, const char* path) {
  if (!config) return null_argument("config");
  if (!path) return null_argument("path");
  return guarded([&] {
    std::ostringstream text;
    mks::write_config(text, config->value);
    write_text_file(path, text.str());
    return MKS_OK;
  });
}

mks_status mks_config_get_string(const mks_config* config, const char* section,
                                 const char* key, char* buf, size_t capacity,
                                 size_t* needed) {
  if (!config) return null_argument("config");
  if (!section || !key) return null_argument("section/key");
  const std::string s = section;
  const std::string k = key;
  const std::string* v = nullptr;
  if (s == "io" && k == "out_dir") v = &config->value.out_dir;
  if (s == "io" && k == "weights") v = &config->value.weights;
  if (!v) return fail(MKS_ERR_ARGUMENT, "no string key " + s + "." + k);
  if (needed) *needed = v->size() + 1;
  if (buf && capacity > 0) {
    const std::size_t n = std::min(capacity - 1, v->size());
    std::memcpy(buf, v->data(), n);
    buf[n] = '\0';
  }
  return MKS_OK;
}

mks_status mks_config_seed(const mks_config* config, uint64_t* seed) {
  if (!config) return null_argument("config");
  if (!seed) return null_argument("seed");
  *seed = config->value.seed;
  return MKS_OK;
}

void mks_config_free(mks_config* config) { delete config; }

// Tensors

mks_status mks_tensor_create(const int64_t shape[4], mks_dtype dtype,
                             mks_tensor** out) {
  if (!shape) return null_argument("shape");
  if (!out) return null_argument("out");
  return guarded([&] {
    const mks::Shape s = to_shape(shape);
    if (!s.positive()) throw mks::ShapeError("tensor shape " + s.str());
    if (dtype == MKS_F32) {
      *out = new mks_tensor{mks::Tensor<float>(s)};
    } else if (dtype == MKS_F64) {
      *out = new mks_tensor{mks::Tensor<double>(s)};
    } else {
      return fail(MKS_ERR_ARGUMENT, "unknown dtype");
    }
    return MKS_OK;
  });
}

mks_status mks_tensor_random(const int64_t shape[4], mks_dtype dtype,
                             uint64_t seed, mks_tensor** out) {
  mks_status st = mks_tensor_create(shape, dtype, out);
  if (st != MKS_OK) return st;
  mks::Rng rng(seed);
  std::visit(
      [&](auto& t) {
        using T = typename std::decay_t<decltype(t)>::value_type;
        for (auto& v : t.data()) v = static_cast<T>(rng.normal());
      },
      (*out)->value);
  return MKS_OK;
}

mks_status mks_tensor_shape(const mks_tensor* t, int64_t shape[4]) {
  if (!t) return null_argument("tensor");
  if (!shape) return null_argument("shape");
  const mks::Shape s = std::visit([](const auto& v) { return v.shape(); }, t->value);
  shape[0] = s.n;
  shape[1] = s.c;
  shape[2] = s.h;
  shape[3] = s.w;
  return MKS_OK;
}

mks_status mks_tensor_dtype(const mks_tensor* t, mks_dtype* dtype) {
  if (!t) return null_argument("tensor");
  if (!dtype) return null_argument("dtype");
  *dtype = std::holds_alternative<mks::Tensor<float>>(t->value) ? MKS_F32 : MKS_F64;
  return MKS_OK;
}

mks_status mks_tensor_read(const mks_tensor* t, double* values, size_t count) {
  if (!t) return null_argument("tensor");
  if (!values) return null_argument("values");
  return std::visit(
      [&](const auto& v) {
        if (static_cast<std::int64_t>(count) != v.numel()) {
          return fail(MKS_ERR_SHAPE, "count does not match tensor size");
        }
        for (std::int64_t i = 0; i < v.numel(); ++i) {
          values[i] = static_cast<double>(v[i]);
        }
        return MKS_OK;
      },
      t->value);
}

mks_status mks_tensor_write(mks_tensor* t, const double* values, size_t count) {
  if (!t) return null_argument("tensor");
  if (!values) return null_argument("values");
  return std::visit(
      [&](auto& v) {
        using T = typename std::decay_t<decltype(v)>::value_type;
        if (static_cast<std::int64_t>(count) != v.numel()) {
          return fail(MKS_ERR_SHAPE, "count does not match tensor size");
        }
        for (std::int64_t i = 0; i < v.numel(); ++i) {
          v[i] = static_cast<T>(values[i]);
        }
        return MKS_OK;
      },
      t->value);
}

mks_status mks_tensor_load(const char* path, mks_tensor** out) {
  if (!path) return null_argument("path");
  if (!out) return null_argument("out");
  return guarded([&] {
    *out = new mks_tensor{mks::load_tensor(path)};
    return MKS_OK;
  });
}

mks_status mks_tensor_save(const mks_tensor* t, const char* path) {
  if (!t) return null_argument("tensor");
  if (!path) return null_argument("path");
  return guarded([&] {
    std::visit([&](const auto& v) { mks::save_tensor(path, v); }, t->value);
    return MKS_OK;
  });
}

mks_status mks_tensor_equal(const mks_tensor* a, const mks_tensor* b,
                            int* equal) {
  if (!a || !b) return null_argument("tensor");
  if (!equal) return null_argument("equal");
  *equal = 0;
  if (a->value.index() != b->value.index()) return MKS_OK;
  *equal = std::visit(
      [&](const auto& x) {
        using Tn = std::decay_t<decltype(x)>;
        return bits_equal(x, std::get<Tn>(b->value)) ? 1 : 0;
      },
      a->value);
  return MKS_OK;
}

void mks_tensor_free(mks_tensor* t) { delete t; }

// Models

mks_status mks_model_create(const mks_config* config, uint64_t seed,
                            mks_model** out) {
  if (!config) return null_argument("config");
  if (!out) return null_argument("out");
  return guarded([&] {
    config->value.validate();
    auto m = std::make_unique<mks::Model<float>>(model_config(config->value), seed);
    *out = new mks_model{std::move(m)};
    return MKS_OK;
  });
}

mks_status mks_model_save(mks_model* model, const char* path) {
  if (!model) return null_argument("model");
  if (!path) return null_argument("path");
  return guarded([&] {
    mks::save_weights(path, *model->value);
    return MKS_OK;
  });
}

mks_status mks_model_load(mks_model* model, const char* path) {
  if (!model) return null_argument("model");
  if (!path) return null_argument("path");
  return guarded([&] {
    mks::load_weights(path, *model->value);
    return MKS_OK;
  });
}

mks_status mks_model_param_count(mks_model* model, int64_t* count) {
  if (!model) return null_argument("model");
  if (!count) return null_argument("count");
  return guarded([&] {
    *count = mks::count_params(*model->value);
    return MKS_OK;
  });
}

mks_status mks_model_param(mks_model* model, const char* name, mks_tensor** out) {
  if (!model) return null_argument("model");
  if (!name) return null_argument("name");
  if (!out) return null_argument("out");
  return guarded([&] {
    auto params = model->value->named_params();
    auto it = params.find(name);
    if (it == params.end()) {
      return fail(MKS_ERR_ARGUMENT, std::string("no parameter named ") + name);
    }
    *out = new mks_tensor{it->second->value};
    return MKS_OK;
  });
}

mks_status mks_model_equal(mks_model* a, mks_model* b, int* equal) {
  if (!a || !b) return null_argument("model");
  if (!equal) return null_argument("equal");
  return guarded([&] {
    using Named = std::vector<std::pair<std::string, const mks::Tensor<float>*>>;
    auto collect = [](mks::Model<float>& m) {
      Named out;
      m.visit([&](mks::Param<float>& p) { out.emplace_back(p.name, &p.value); });
      m.visit_buffers([&](const std::string& n, mks::Tensor<float>& t) {
        out.emplace_back(n, &t);
      });
      return out;
    };
    const Named x = collect(*a->value);
    const Named y = collect(*b->value);
    bool same = x.size() == y.size();
    for (std::size_t i = 0; same && i < x.size(); ++i) {
      same = x[i].first == y[i].first && bits_equal(*x[i].second, *y[i].second);
    }
    *equal = same ? 1 : 0;
    return MKS_OK;
  });
}

mks_status mks_model_forward(mks_model* model, const mks_tensor* input,
                             mks_tensor** logits) {
  if (!model) return null_argument("model");
  if (!input) return null_argument("input");
  if (!logits) return null_argument("logits");
  return guarded([&] {
    mks::Tensor<float> x = std::visit(
        [](const auto& t) {
          mks::Tensor<float> f(t.shape());
          for (std::int64_t i = 0; i < t.numel(); ++i) f[i] = static_cast<float>(t[i]);
          return f;
        },
        input->value);
    *logits = new mks_tensor{model->value->forward(x, mks::Mode::kEval, nullptr)};
    return MKS_OK;
  });
}

void mks_model_free(mks_model* model) { delete model; }

// Gradient checks

mks_status mks_gradcheck(const char* scope, int perturb, mks_gradcheck_fn callback,
                         void* user, int* all_passed) {
  if (!scope) return null_argument("scope");
  return guarded([&] {
    std::vector<mks::GradCheckReport> reports;
    try {
      reports = mks::run_gradcheck(scope, perturb != 0);
    } catch (const mks::ConfigError& e) {
      return fail(MKS_ERR_ARGUMENT, e.what(), e.field());
    }
    bool ok = true;
    for (const auto& r : reports) {
      ok = ok && r.passed;
      if (!callback) continue;
      double tol = 0.0;
      for (const auto& u : mks::gradcheck_units()) {
        if (u.name == r.unit) tol = u.tolerance;
      }
      const mks_gradcheck_result res{r.unit.c_str(), r.max_rel_error, tol,
                                     r.elements_checked, r.passed ? 1 : 0};
      callback(&res, user);
    }
    if (all_passed) *all_passed = ok ? 1 : 0;
    return MKS_OK;
  });
}

mks_status mks_gradcheck_unit_count(size_t* count) {
  if (!count) return null_argument("count");
  return guarded([&] {
    *count = mks::gradcheck_units().size();
    return MKS_OK;
  });
}

const char* mks_gradcheck_unit_name(size_t index) {
  try {
    const auto& units = mks::gradcheck_units();
    return index < units.size() ? units[index].name.c_str() : nullptr;
  } catch (...) {
    return nullptr;
  }
}

// Metrics

mks_status mks_eval_ap_file(const char* path, double* ap) {
  if (!path) return null_argument("path");
  if (!ap) return null_argument("ap");
  return guarded([&] {
    const mks::APFixture f = mks::load_ap_fixture(path);
    *ap = mks::average_precision(mks::pr_curve(f.predictions, f.total_positives)).ap;
    return MKS_OK;
  });
}

mks_status mks_average_precision(const double* scores, const int* labels,
                                 size_t count, double* ap) {
  if (count > 0 && (!scores || !labels)) return null_argument("scores/labels");
  if (!ap) return null_argument("ap");
  return guarded([&] {
    std::vector<mks::ScoredPrediction> p(count);
    std::int64_t positives = 0;
    for (std::size_t i = 0; i < count; ++i) {
      p[i] = {scores[i], labels[i] != 0};
      positives += labels[i] != 0;
    }
    *ap = mks::average_precision(mks::pr_curve(p, positives)).ap;
    return MKS_OK;
  });
}

// Training

mks_status mks_train(const mks_config* config, const char* csv_path,
                     mks_epoch_fn callback, void* user, mks_model** trained) {
  if (!config) return null_argument("config");
  return guarded([&] {
    const mks::RunConfig& c = config->value;
    c.validate();
    std::vector<mks::EpochMetrics> history;
    mks::TrainResult r = mks::train(
        c.model, c.train, c.variant, c.seed, [&](const mks::EpochMetrics& m) {
          if (callback) callback(m.epoch, m.loss, m.ap, user);
        });
    if (csv_path) {
      std::ostringstream csv;
      mks::write_history_csv(csv, r.history);
      write_text_file(csv_path, csv.str());
    }
    if (trained) *trained = new mks_model{std::move(r.model)};
    return MKS_OK;
  });
}

mks_status mks_ablate(const mks_config* config, const char* csv_path,
                      mks_ablation_progress_fn progress,
                      mks_ablation_result_fn result, void* user) {
  if (!config) return null_argument("config");
  return guarded([&] {
    const mks::RunConfig& c = config->value;
    c.validate();
    const mks::AblationReport report = mks::ablation_run(
        c.model, c.train, c.ablation_seeds,
        [&](mks::Variant v, std::uint64_t seed, const mks::EpochMetrics& m) {
          if (progress) {
            progress(mks::variant_name(v).c_str(), seed, m.epoch, m.loss, m.ap, user);
          }
        });
    if (csv_path) {
      std::ostringstream csv;
      mks::write_ablation_csv(csv, report);
      write_text_file(csv_path, csv.str());
    }
    if (result) {
      for (const auto& v : report.variants) {
        result(v.name.c_str(), v.mean_ap, v.delta_vs_base, user);
      }
    }
    return MKS_OK;
  });
}

// Effective receptive field

mks_status mks_erf(const mks_config* config, mks_erf_probe probe, int64_t size,
                   int64_t samples, uint64_t seed, const char* pgm_path,
                   const char* csv_path, mks_erf_summary* summary) {
  if (!config) return null_argument("config");
  if (probe != MKS_ERF_BLOCK && probe != MKS_ERF_CONV3) {
    return fail(MKS_ERR_ARGUMENT, "unknown ERF probe");
  }
  if (size < 1 || samples < 1) {
    return fail(MKS_ERR_ARGUMENT, "size and samples must be >= 1");
  }
  return guarded([&] {
    config->value.validate();
    const mks::BlockConfig bc = model_config(config->value).block_config(0);
    const mks::Shape input{1, bc.channels, size, size};
    mks::Rng rng(seed);
    mks::ErfResult r;
    if (probe == MKS_ERF_BLOCK) {
      mks::MKSBlock<double> block("block", bc);
      block.init(rng);
      r = mks::erf_estimate(mks::probe_block(block), input, samples, seed);
    } else {
      mks::Conv2d<double> conv(
          "conv", mks::ConvSpec::square(bc.channels, bc.channels, 3, 1, 1, 1), true);
      conv.init(rng);
      r = mks::erf_estimate(mks::probe_conv(conv), input, samples, seed);
    }
    if (pgm_path) {
      std::ostringstream pgm;
      mks::write_erf_pgm(pgm, r);
      write_text_file(pgm_path, pgm.str());
    }
    if (csv_path) {
      std::ostringstream csv;
      mks::write_erf_csv(csv, r);
      write_text_file(csv_path, csv.str());
    }
    if (summary) *summary = {r.support_height, r.support_width, r.radius95};
    return MKS_OK;
  });
}

// Benchmark

mks_status mks_bench(const mks_config* config, int64_t batch, mks_text_fn table,
                     void* user, mks_bench_summary* summary) {
  if (!config) return null_argument("config");
  if (batch < 1) return fail(MKS_ERR_ARGUMENT, "batch must be >= 1");
  return guarded([&] {
    const mks::RunConfig& c = config->value;
    c.validate();
    const std::int64_t s = c.train.image_size;
    const mks::BenchReport r =
        mks::run_bench(model_config(c), s, s, batch, c.seed);
    if (table) {
      std::ostringstream text;
      mks::write_bench_table(text, r);
      table(text.str().c_str(), user);
    }
    if (summary) *summary = {r.total_params, r.total_flops, r.forward_median_ms};
    return MKS_OK;
  });
}

}  // extern "C"

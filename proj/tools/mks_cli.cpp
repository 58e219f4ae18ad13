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

// mks-cli: gradient checks, benchmarks, training, ablation, ERF maps, AP
// evaluation and weight/tensor export. Exit codes: 0 success, 1 runtime or
// check failure, 2 usage or configuration error.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mks/mks.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// Thrown to unwind with an exit code after the message has been printed.
struct Exit {
  int code;
};

int exit_code_for(mks_status st) {
  return st == MKS_ERR_CONFIG || st == MKS_ERR_ARGUMENT ? kExitUsage : kExitFailure;
}

void check(mks_status st, const char* what) {
  if (st == MKS_OK) return;
  const std::string field = mks_last_error_field();
  if (field.empty()) {
    std::fprintf(stderr, "error: %s: %s\n", what, mks_last_error());
  } else {
    std::fprintf(stderr, "error: %s: %s [field %s]\n", what, mks_last_error(),
                 field.c_str());
  }
  throw Exit{exit_code_for(st)};
}

struct ConfigDeleter {
  void operator()(mks_config* c) const { mks_config_free(c); }
};
struct ModelDeleter {
  void operator()(mks_model* m) const { mks_model_free(m); }
};
struct TensorDeleter {
  void operator()(mks_tensor* t) const { mks_tensor_free(t); }
};
using ConfigPtr = std::unique_ptr<mks_config, ConfigDeleter>;
using ModelPtr = std::unique_ptr<mks_model, ModelDeleter>;
using TensorPtr = std::unique_ptr<mks_tensor, TensorDeleter>;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

// Loads the config file (or defaults), applies flag overrides and validates.
ConfigPtr load_config(const GlobalOptions& g) {
  mks_config* raw = nullptr;
  if (g.config_path.empty()) {
    check(mks_config_default(&raw), "config");
  } else {
    check(mks_config_load(g.config_path.c_str(), &raw), "config");
  }
  ConfigPtr c(raw);
  if (g.seed) {
    check(mks_config_set(c.get(), "train", "seed", std::to_string(*g.seed).c_str()),
          "--seed");
  }
  if (g.out_dir) check(mks_config_set(c.get(), "io", "out_dir", g.out_dir->c_str()), "--out");
  check(mks_config_validate(c.get()), "config");
  return c;
}

std::string config_string(const mks_config* c, const char* key) {
  std::size_t needed = 0;
  check(mks_config_get_string(c, "io", key, nullptr, 0, &needed), key);
  std::string s(needed, '\0');
  check(mks_config_get_string(c, "io", key, s.data(), s.size(), nullptr), key);
  s.resize(needed - 1);
  return s;
}

std::filesystem::path output_dir(const mks_config* c) {
  std::filesystem::path dir = config_string(c, "out_dir");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    std::fprintf(stderr, "error: cannot create %s: %s\n", dir.c_str(), ec.message().c_str());
    throw Exit{kExitFailure};
  }
  return dir;
}

// Relative weight paths live under the output directory.
std::filesystem::path weights_path(const mks_config* c) {
  std::filesystem::path p = config_string(c, "weights");
  return p.is_absolute() ? p : output_dir(c) / p;
}

int cmd_gradcheck(const std::string& scope, bool perturb) {
  int all_passed = 0;
  std::printf("%-26s %14s %10s %8s  %s\n", "unit", "max_rel_err", "tolerance",
              "checked", "result");
  const mks_status st = mks_gradcheck(
      scope.c_str(), perturb ? 1 : 0,
      [](const mks_gradcheck_result* r, void*) {
        std::printf("%-26s %14.3e %10.0e %8" PRId64 "  %s\n", r->unit,
                    r->max_rel_error, r->tolerance, r->elements,
                    r->passed ? "PASS" : "FAIL");
        std::fflush(stdout);
      },
      nullptr, &all_passed);
  check(st, "gradcheck");
  return all_passed ? kExitOk : kExitFailure;
}

int cmd_bench(const GlobalOptions& g, std::int64_t batch) {
  ConfigPtr c = load_config(g);
  mks_bench_summary s{};
  check(mks_bench(c.get(), batch,
                  [](const char* text, void*) { std::fputs(text, stdout); },
                  nullptr, &s),
        "bench");
  return kExitOk;
}

int cmd_train(const GlobalOptions& g) {
  ConfigPtr c = load_config(g);
  const std::filesystem::path csv = output_dir(c.get()) / "metrics.csv";
  mks_model* raw = nullptr;
  check(mks_train(c.get(), csv.c_str(),
                  [](std::int64_t epoch, double loss, double ap, void*) {
                    std::printf("epoch %3" PRId64 "  val_loss %.6f  ap %.6f\n",
                                epoch, loss, ap);
                    std::fflush(stdout);
                  },
                  nullptr, &raw),
        "train");
  ModelPtr model(raw);
  const std::filesystem::path w = weights_path(c.get());
  check(mks_model_save(model.get(), w.c_str()), "save weights");
  std::printf("metrics: %s\nweights: %s\n", csv.c_str(), w.c_str());
  return kExitOk;
}

int cmd_ablate(const GlobalOptions& g) {
  ConfigPtr c = load_config(g);
  const std::filesystem::path csv = output_dir(c.get()) / "ablation.csv";
  check(mks_ablate(
            c.get(), csv.c_str(),
            [](const char* variant, std::uint64_t seed, std::int64_t epoch,
               double loss, double ap, void*) {
              std::printf("%-11s seed %" PRIu64 " epoch %3" PRId64
                          "  val_loss %.6f  ap %.6f\n",
                          variant, seed, epoch, loss, ap);
              std::fflush(stdout);
            },
            [](const char* variant, double mean_ap, double delta, void*) {
              std::printf("%-11s mean_ap %.6f  delta_vs_base %+.6f\n", variant,
                          mean_ap, delta);
            },
            nullptr),
        "ablate");
  std::printf("report: %s\n", csv.c_str());
  return kExitOk;
}

int cmd_erf(const GlobalOptions& g, std::int64_t size, std::int64_t samples) {
  ConfigPtr c = load_config(g);
  std::uint64_t seed = 0;
  check(mks_config_seed(c.get(), &seed), "seed");
  const std::filesystem::path dir = output_dir(c.get());
  struct Probe {
    mks_erf_probe kind;
    const char* name;
  };
  for (const Probe p : {Probe{MKS_ERF_BLOCK, "block"}, Probe{MKS_ERF_CONV3, "conv3x3"}}) {
    const std::filesystem::path pgm = dir / ("erf_" + std::string(p.name) + ".pgm");
    const std::filesystem::path csv = dir / ("erf_" + std::string(p.name) + ".csv");
    mks_erf_summary s{};
    check(mks_erf(c.get(), p.kind, size, samples, seed, pgm.c_str(), csv.c_str(), &s),
          "erf");
    std::printf("%-8s support %" PRId64 "x%" PRId64 "  radius95 %.4f  -> %s\n",
                p.name, s.support_height, s.support_width, s.radius95, pgm.c_str());
  }
  return kExitOk;
}

int cmd_eval_ap(const std::string& path) {
  double ap = 0.0;
  check(mks_eval_ap_file(path.c_str(), &ap), "eval-ap");
  std::printf("%.6f\n", ap);
  return kExitOk;
}

int cmd_export_weights(const GlobalOptions& g, const std::string& path,
                       const std::string& from) {
  ConfigPtr c = load_config(g);
  std::uint64_t seed = 0;
  check(mks_config_seed(c.get(), &seed), "seed");
  mks_model* raw = nullptr;
  check(mks_model_create(c.get(), seed, &raw), "model");
  ModelPtr model(raw);
  if (!from.empty()) check(mks_model_load(model.get(), from.c_str()), "load weights");
  check(mks_model_save(model.get(), path.c_str()), "save weights");

  // Reload into a differently seeded model and compare bit for bit.
  check(mks_model_create(c.get(), seed + 1, &raw), "model");
  ModelPtr reloaded(raw);
  check(mks_model_load(reloaded.get(), path.c_str()), "reload weights");
  int equal = 0;
  check(mks_model_equal(model.get(), reloaded.get(), &equal), "compare");
  std::int64_t params = 0;
  check(mks_model_param_count(model.get(), &params), "count");
  std::printf("wrote %s  params %" PRId64 "  round-trip %s\n", path.c_str(), params,
              equal ? "bit-identical" : "MISMATCH");
  return equal ? kExitOk : kExitFailure;
}

std::vector<std::int64_t> parse_shape(const std::string& text) {
  std::vector<std::int64_t> dims;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string part = text.substr(pos, comma == std::string::npos ? std::string::npos
                                                                         : comma - pos);
    try {
      std::size_t used = 0;
      const long long v = std::stoll(part, &used);
      if (used != part.size() || v < 1) throw std::invalid_argument(part);
      dims.push_back(v);
    } catch (const std::exception&) {
      std::fprintf(stderr, "error: --shape: expected B,C,H,W positive integers\n");
      throw Exit{kExitUsage};
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (dims.size() != 4) {
    std::fprintf(stderr, "error: --shape: expected exactly 4 dimensions\n");
    throw Exit{kExitUsage};
  }
  return dims;
}

int cmd_export_tensor(const GlobalOptions& g, const std::string& path,
                      const std::string& shape_text, const std::string& dtype_text,
                      const std::string& from, const std::string& param) {
  TensorPtr t;
  mks_tensor* raw = nullptr;
  if (!param.empty()) {
    ConfigPtr c = load_config(g);
    std::uint64_t seed = 0;
    check(mks_config_seed(c.get(), &seed), "seed");
    mks_model* m = nullptr;
    check(mks_model_create(c.get(), seed, &m), "model");
    ModelPtr model(m);
    if (!from.empty()) check(mks_model_load(model.get(), from.c_str()), "load weights");
    check(mks_model_param(model.get(), param.c_str(), &raw), "--param");
  } else {
    ConfigPtr c = load_config(g);
    std::uint64_t seed = 0;
    check(mks_config_seed(c.get(), &seed), "seed");
    const std::vector<std::int64_t> dims = parse_shape(shape_text);
    const mks_dtype dt = dtype_text == "f32" ? MKS_F32 : MKS_F64;
    check(mks_tensor_random(dims.data(), dt, seed, &raw), "tensor");
  }
  t.reset(raw);
  check(mks_tensor_save(t.get(), path.c_str()), "save tensor");
  check(mks_tensor_load(path.c_str(), &raw), "reload tensor");
  TensorPtr back(raw);
  int equal = 0;
  check(mks_tensor_equal(t.get(), back.get(), &equal), "compare");
  std::int64_t s[4] = {};
  check(mks_tensor_shape(t.get(), s), "shape");
  std::printf("wrote %s  shape (%" PRId64 ",%" PRId64 ",%" PRId64 ",%" PRId64
              ")  round-trip %s\n",
              path.c_str(), s[0], s[1], s[2], s[3], equal ? "bit-identical" : "MISMATCH");
  return equal ? kExitOk : kExitFailure;
}

int cmd_config(const GlobalOptions& g, const std::string& path) {
  ConfigPtr c = load_config(g);
  check(mks_config_save(c.get(), path.c_str()), "config");
  std::printf("wrote %s\n", path.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-kernel selection attention toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", mks_version());

  GlobalOptions g;
  std::uint64_t seed = 0;
  std::string out;
  app.add_option("--config", g.config_path, "INI run configuration")
      ->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Override train.seed");
  auto* out_opt = app.add_option("--out", out, "Override io.out_dir");

  std::string scope = "all";
  bool perturb = false;
  auto* gradcheck = app.add_subcommand(
      "gradcheck", "Finite-difference gradient checks (all, ops, modules or a unit)");
  gradcheck->add_option("scope", scope, "Unit name or group");
  gradcheck->add_flag("--perturb-backward", perturb,
                      "Scale one analytic gradient by 1.01 (negative control)");

  std::int64_t bench_batch = 1;
  auto* bench = app.add_subcommand("bench", "Per-layer FLOPs/params and forward latency");
  bench->add_option("--batch", bench_batch, "Batch size of the timed forward")
      ->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "Train on the synthetic task");
  auto* ablate = app.add_subcommand("ablate", "Four-variant ablation over train.seeds");

  std::int64_t erf_size = 33;
  std::int64_t erf_samples = 16;
  auto* erf = app.add_subcommand("erf", "Effective receptive field of a block and a 3x3 conv");
  erf->add_option("--size", erf_size, "Input height and width")->check(CLI::PositiveNumber);
  erf->add_option("--samples", erf_samples, "Random inputs averaged")
      ->check(CLI::PositiveNumber);

  std::string ap_file;
  auto* eval_ap = app.add_subcommand("eval-ap", "AP of a 'score label' file");
  eval_ap->add_option("file", ap_file, "Fixture path")->required()->check(CLI::ExistingFile);

  std::string kind;
  std::string export_path;
  std::string from;
  std::string param;
  std::string shape = "1,3,64,64";
  std::string dtype = "f32";
  auto* exp = app.add_subcommand("export", "Write weights or a tensor and verify the round-trip");
  exp->add_option("kind", kind, "weights or tensor")
      ->required()
      ->check(CLI::IsMember({"weights", "tensor"}));
  exp->add_option("path", export_path, "Output file")->required();
  exp->add_option("--from", from, "Weight file to load instead of a fresh init")
      ->check(CLI::ExistingFile);
  exp->add_option("--param", param, "Export this named parameter (tensor only)");
  exp->add_option("--shape", shape, "B,C,H,W of a random tensor");
  exp->add_option("--dtype", dtype, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));

  std::string config_out;
  auto* config = app.add_subcommand("config", "Write the effective configuration");
  config->add_option("path", config_out, "Output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  if (*seed_opt) g.seed = seed;
  if (*out_opt) g.out_dir = out;

  try {
    if (*gradcheck) return cmd_gradcheck(scope, perturb);
    if (*bench) return cmd_bench(g, bench_batch);
    if (*train) return cmd_train(g);
    if (*ablate) return cmd_ablate(g);
    if (*erf) return cmd_erf(g, erf_size, erf_samples);
    if (*eval_ap) return cmd_eval_ap(ap_file);
    if (*exp) {
      if (kind == "weights") return cmd_export_weights(g, export_path, from);
      return cmd_export_tensor(g, export_path, shape, dtype, from, param);
    }
    if (*config) return cmd_config(g, config_out);
  } catch (const Exit& e) {
    return e.code;
  }
  return kExitUsage;
}

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

/* C interface of the mks shared library.
 *
 * Every function returns an mks_status. On failure the thread-local message
 * returned by mks_last_error() describes the cause, and for MKS_ERR_CONFIG
 * mks_last_error_field() names the offending configuration key. Handles are
 * opaque and must be released with the matching *_free function; passing
 * NULL to a *_free function is a no-op. */

#ifndef MKS_MKS_H_
#define MKS_MKS_H_

#include <stddef.h>
#include <stdint.h>

#if defined(MKS_BUILDING_LIBRARY)
#define MKS_API __attribute__((visibility("default")))
#else
#define MKS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mks_status {
  MKS_OK = 0,
  MKS_ERR_ARGUMENT = 1,  /* NULL handle, bad enum, unknown name */
  MKS_ERR_CONFIG = 2,    /* invalid configuration value */
  MKS_ERR_SHAPE = 3,     /* tensor shape outside an operator contract */
  MKS_ERR_SPEC = 4,      /* invalid layer hyperparameters */
  MKS_ERR_FORMAT = 5,    /* unreadable or corrupt file */
  MKS_ERR_CHECK = 6,     /* a verification (gradcheck, round-trip) failed */
  MKS_ERR_INTERNAL = 7   /* anything else */
} mks_status;

typedef enum mks_dtype { MKS_F32 = 0, MKS_F64 = 1 } mks_dtype;

typedef struct mks_config mks_config;
typedef struct mks_model mks_model;
typedef struct mks_tensor mks_tensor;

MKS_API const char* mks_version(void);
MKS_API const char* mks_status_name(mks_status status);
MKS_API const char* mks_last_error(void);
MKS_API const char* mks_last_error_field(void);

/* Configuration. Keys follow the INI grammar of the config file. */
MKS_API mks_status mks_config_default(mks_config** out);
MKS_API mks_status mks_config_load(const char* path, mks_config** out);
MKS_API mks_status mks_config_set(mks_config* config, const char* section,
                                  const char* key, const char* value);
MKS_API mks_status mks_config_validate(const mks_config* config);
MKS_API mks_status mks_config_save(const mks_config* config, const char* path);
/* Copies io.out_dir or io.weights (NUL-terminated) into buf. *needed receives
 * the required size including the terminator. */
MKS_API mks_status mks_config_get_string(const mks_config* config,
                                         const char* section, const char* key,
                                         char* buf, size_t capacity,
                                         size_t* needed);
MKS_API mks_status mks_config_seed(const mks_config* config, uint64_t* seed);
MKS_API void mks_config_free(mks_config* config);

/* Tensors (NCHW). */
MKS_API mks_status mks_tensor_create(const int64_t shape[4], mks_dtype dtype,
                                     mks_tensor** out);
MKS_API mks_status mks_tensor_random(const int64_t shape[4], mks_dtype dtype,
                                     uint64_t seed, mks_tensor** out);
MKS_API mks_status mks_tensor_shape(const mks_tensor* t, int64_t shape[4]);
MKS_API mks_status mks_tensor_dtype(const mks_tensor* t, mks_dtype* dtype);
/* Element copies converted to or from double. count must equal numel. */
MKS_API mks_status mks_tensor_read(const mks_tensor* t, double* values,
                                   size_t count);
MKS_API mks_status mks_tensor_write(mks_tensor* t, const double* values,
                                    size_t count);
MKS_API mks_status mks_tensor_load(const char* path, mks_tensor** out);
MKS_API mks_status mks_tensor_save(const mks_tensor* t, const char* path);
/* 1 when dtype, shape and every bit of the data agree. */
MKS_API mks_status mks_tensor_equal(const mks_tensor* a, const mks_tensor* b,
                                    int* equal);
MKS_API void mks_tensor_free(mks_tensor* t);

/* Models use the configured backbone, variant and single precision. */
MKS_API mks_status mks_model_create(const mks_config* config, uint64_t seed,
                                    mks_model** out);
MKS_API mks_status mks_model_save(mks_model* model, const char* path);
MKS_API mks_status mks_model_load(mks_model* model, const char* path);
MKS_API mks_status mks_model_param_count(mks_model* model, int64_t* count);
MKS_API mks_status mks_model_param(mks_model* model, const char* name,
                                   mks_tensor** out);
/* 1 when every parameter and buffer agrees bit for bit. */
MKS_API mks_status mks_model_equal(mks_model* a, mks_model* b, int* equal);
/* Eval-mode logits (B, 1, h, w). */
MKS_API mks_status mks_model_forward(mks_model* model, const mks_tensor* input,
                                     mks_tensor** logits);
MKS_API void mks_model_free(mks_model* model);

/* Finite-difference gradient checks. scope is "all", "ops", "modules" or a
 * unit name; an unknown scope yields MKS_ERR_ARGUMENT. perturb scales one
 * analytic gradient by 1.01 as a negative control. *all_passed is 1 when
 * every unit passed. */
typedef struct mks_gradcheck_result {
  const char* unit;
  double max_rel_error;
  double tolerance;
  int64_t elements;
  int passed;
} mks_gradcheck_result;
typedef void (*mks_gradcheck_fn)(const mks_gradcheck_result* result,
                                 void* user);
MKS_API mks_status mks_gradcheck(const char* scope, int perturb,
                                 mks_gradcheck_fn callback, void* user,
                                 int* all_passed);
MKS_API mks_status mks_gradcheck_unit_count(size_t* count);
MKS_API const char* mks_gradcheck_unit_name(size_t index);

/* Average precision of "score label" lines, or of parallel arrays. */
MKS_API mks_status mks_eval_ap_file(const char* path, double* ap);
MKS_API mks_status mks_average_precision(const double* scores,
                                         const int* labels, size_t count,
                                         double* ap);

/* Training on the synthetic task. csv_path (nullable) receives the
 * epoch,loss,ap history; trained (nullable) receives the final model. */
typedef void (*mks_epoch_fn)(int64_t epoch, double loss, double ap,
                             void* user);
MKS_API mks_status mks_train(const mks_config* config, const char* csv_path,
                             mks_epoch_fn callback, void* user,
                             mks_model** trained);

/* Four-variant ablation over train.seeds. */
typedef void (*mks_ablation_progress_fn)(const char* variant, uint64_t seed,
                                         int64_t epoch, double loss, double ap,
                                         void* user);
typedef void (*mks_ablation_result_fn)(const char* variant, double mean_ap,
                                       double delta_vs_base, void* user);
MKS_API mks_status mks_ablate(const mks_config* config, const char* csv_path,
                              mks_ablation_progress_fn progress,
                              mks_ablation_result_fn result, void* user);

/* Effective receptive field of one randomly initialized probe on a
 * (1, C, size, size) input. The block probe uses the first stage of the
 * configured backbone; the conv probe is a dense 3x3 conv of equal width. */
typedef enum mks_erf_probe { MKS_ERF_BLOCK = 0, MKS_ERF_CONV3 = 1 } mks_erf_probe;
typedef struct mks_erf_summary {
  int64_t support_height;
  int64_t support_width;
  double radius95;
} mks_erf_summary;
MKS_API mks_status mks_erf(const mks_config* config, mks_erf_probe probe,
                           int64_t size, int64_t samples, uint64_t seed,
                           const char* pgm_path, const char* csv_path,
                           mks_erf_summary* summary);

/* Per-layer FLOPs/params table plus timed forward passes, delivered as text. */
typedef void (*mks_text_fn)(const char* text, void* user);
typedef struct mks_bench_summary {
  int64_t total_params;
  int64_t total_flops;
  double forward_median_ms;
} mks_bench_summary;
MKS_API mks_status mks_bench(const mks_config* config, int64_t batch,
                             mks_text_fn table, void* user,
                             mks_bench_summary* summary);

#ifdef __cplusplus
}  /* extern "C" */
#endif

#endif  /* MKS_MKS_H_ */

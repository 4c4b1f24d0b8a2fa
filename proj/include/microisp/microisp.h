/* Copyright (c) 2026 MicroISP contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C API of the MicroISP library: a tiny three-branch convolutional network
 * that renders RAW Bayer mosaics into RGB photos, with training, planned
 * inference, evaluation, gradient checking and benchmarking.
 *
 * Conventions:
 *   - every fallible function returns misp_status; MISP_OK is 0;
 *   - on failure, misp_last_error() returns a thread-local message;
 *   - objects are opaque handles released with the matching _free function;
 *   - strings returned through char** are owned by the caller and released
 *     with misp_string_free().
 */

#ifndef MICROISP_MICROISP_H_
#define MICROISP_MICROISP_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum misp_status {
    MISP_OK = 0,
    MISP_ERROR_INVALID_ARGUMENT = 1, /* null pointers, bad enum values */
    MISP_ERROR_CONTRACT = 2,         /* shape/channel contract violations */
    MISP_ERROR_CONFIG = 3,           /* invalid configuration */
    MISP_ERROR_FORMAT = 4,           /* malformed file content */
    MISP_ERROR_IO = 5,               /* filesystem failures */
    MISP_ERROR_NUMERIC = 6,          /* non-finite values (diverged training) */
    MISP_ERROR_UNKNOWN = 7
} misp_status;

typedef enum misp_attention {
    MISP_ATTENTION_ENHANCED = 0,
    MISP_ATTENTION_STANDARD_POOL = 1,
    MISP_ATTENTION_NONE = 2
} misp_attention;

typedef enum misp_activation {
    MISP_ACTIVATION_PRELU = 0,
    MISP_ACTIVATION_LEAKY_RELU = 1
} misp_activation;

typedef enum misp_branch_mode {
    MISP_BRANCH_SEQUENTIAL = 0,
    MISP_BRANCH_PARALLEL = 1
} misp_branch_mode;

typedef struct misp_model_config {
    float depth_multiplier; /* 0.25, 0.5, 1.0 or 1.5 */
    int32_t attention;      /* misp_attention */
    int32_t activation;     /* misp_activation */
    int32_t clamp_output;   /* clamp inference output to [0,1] */
} misp_model_config;

typedef struct misp_model misp_model;
typedef struct misp_tensor misp_tensor;
typedef struct misp_plan misp_plan;

const char* misp_version(void);
const char* misp_status_name(misp_status status);

/* Thread-local message describing the most recent failure on this thread. */
const char* misp_last_error(void);

void misp_string_free(char* s);

/* Caps internal parallelism process-wide; n <= 0 selects the hardware thread
 * count. Results are bitwise identical for any setting. */
void misp_set_threads(int32_t n);

void misp_default_config(misp_model_config* out);

/* --- tensors (height x width x channels, float32, channel-fastest) --- */

misp_status misp_tensor_create(int32_t height, int32_t width, int32_t channels,
                               const float* data /* nullable: zeros */, misp_tensor** out);
void misp_tensor_free(misp_tensor* t);
int32_t misp_tensor_height(const misp_tensor* t);
int32_t misp_tensor_width(const misp_tensor* t);
int32_t misp_tensor_channels(const misp_tensor* t);
const float* misp_tensor_data(const misp_tensor* t);

/* --- models --- */

misp_status misp_model_build(const misp_model_config* config, uint64_t seed, misp_model** out);
misp_status misp_model_load(const char* path, misp_model** out);
misp_status misp_model_save(const misp_model* model, const char* path);
void misp_model_free(misp_model* model);
misp_status misp_model_get_config(const misp_model* model, misp_model_config* out);
int64_t misp_model_param_count(const misp_model* model);
/* Residual blocks per branch; 0 means the half-block (0.25) variant. */
int32_t misp_model_blocks_per_branch(const misp_model* model);

/* Reference forward pass: packed (h, w, 4) -> RGB (2h, 2w, 3). */
misp_status misp_model_forward(const misp_model* model, const misp_tensor* packed,
                               misp_tensor** out);

/* --- planned execution --- */

misp_status misp_plan_build(const misp_model* model, int32_t packed_height, int32_t packed_width,
                            int32_t branch_mode, misp_plan** out);
void misp_plan_free(misp_plan* plan);
uint64_t misp_plan_peak_bytes(const misp_plan* plan);
uint64_t misp_plan_arena_bytes(const misp_plan* plan);
misp_status misp_plan_execute(const misp_plan* plan, const misp_model* model,
                              const misp_tensor* packed, misp_tensor** out);

/* --- image and dataset I/O --- */

/* Loads a BRW1 or 16-bit PGM raw file, normalizes by black/white level and
 * packs it into the canonical (R, G1, G2, B) 4-channel layout. */
misp_status misp_load_raw_packed(const char* path, misp_tensor** out);

/* Writes an RGB tensor as PPM (P6), bit_depth 8 or 16. Atomic. */
misp_status misp_write_rgb(const misp_tensor* rgb, const char* path, int32_t bit_depth);

/* Generates `count` synthetic raw/target training pairs in dir. */
misp_status misp_synth_dataset(const char* dir, int32_t count, int32_t size, double noise_sigma,
                               uint64_t seed);

/* --- training --- */

typedef void (*misp_train_progress_fn)(int32_t stage, int32_t epoch, double loss, double psnr_db,
                                       void* user_data);

/* Trains a fresh model (or resumes) on the dataset in data_dir.
 * schedule_spec is "paper", "desk" (default when null/empty) or a schedule
 * file path. Writes stage checkpoints, train_state.txt, weights.misp and
 * history.txt into out_dir. */
misp_status misp_train(const char* data_dir, const char* schedule_spec, const char* out_dir,
                       const misp_model_config* config, uint64_t seed, int32_t resume,
                       misp_train_progress_fn progress /* nullable */, void* user_data);

/* --- evaluation / verification / benchmarking --- */

/* PSNR (dB, capped at 99) and mean SSIM between two equally-shaped tensors. */
misp_status misp_psnr(const misp_tensor* a, const misp_tensor* b, double max_value, double* out);
misp_status misp_ssim(const misp_tensor* a, const misp_tensor* b, double* out);

/* Per-image PSNR/SSIM over a dataset directory; report_out receives the
 * formatted text table. */
misp_status misp_evaluate(const misp_model* model, const char* data_dir, int32_t branch_mode,
                          char** report_out);

/* Whole-model gradient check against 64-bit central finite differences.
 * passed_out (nullable) receives 1 when every group is within tolerance. */
misp_status misp_gradcheck(const misp_model_config* config, double tolerance, uint64_t seed,
                           char** report_out, int32_t* passed_out);

/* Closed-form per-layer MAC counts and planned memory for the given packed
 * input size. */
misp_status misp_count_flops(const misp_model* model, int32_t packed_height, int32_t packed_width,
                             char** report_out);

/* Executes `repetitions` timed runs; the report includes per-layer medians,
 * planned peak bytes and the measured allocation. */
misp_status misp_benchmark(const misp_model* model, int32_t packed_height, int32_t packed_width,
                           int32_t branch_mode, int32_t repetitions, char** report_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* MICROISP_MICROISP_H_ */

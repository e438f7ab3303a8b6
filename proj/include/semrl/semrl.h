/*
 * Copyright 2026 The semrl Authors
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

#ifndef SEMRL_SEMRL_H_
#define SEMRL_SEMRL_H_

/*
 * C interface to the semrl library: semantic text transmission over noisy
 * channels with cross-entropy pretraining and self-critic policy-gradient
 * fine-tuning, plus metrics, channel simulation and an experiment harness.
 *
 * Every function returns a semrl_status. On failure, semrl_last_error()
 * describes the problem; the message is thread-local and stays valid until
 * the next failing call on the same thread. Handles are opaque and must be
 * released with their matching *_free function.
 *
 * Strings written into caller buffers are NUL-terminated. When `cap` is too
 * small the call fails with SEMRL_ERR_BUFFER and `*needed` (if non-NULL)
 * receives the required size including the terminator.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SEMRL_API __declspec(dllexport)
#else
#define SEMRL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum semrl_status {
  SEMRL_OK = 0,
  SEMRL_ERR_CONFIG = 1,
  SEMRL_ERR_INPUT = 2,
  SEMRL_ERR_FORMAT = 3,
  SEMRL_ERR_CORRUPTION = 4,
  SEMRL_ERR_DEGENERATE = 5,
  SEMRL_ERR_SHAPE = 6,
  SEMRL_ERR_CONTRACT = 7,
  SEMRL_ERR_DIVERGENCE = 8,
  SEMRL_ERR_IO = 9,
  SEMRL_ERR_LOAD = 10,
  SEMRL_ERR_BUFFER = 11,
  SEMRL_ERR_ARGUMENT = 12,
  SEMRL_ERR_INTERNAL = 99
} semrl_status;

/* Receives one JSON object per call, without a trailing newline. */
typedef void (*semrl_log_fn)(const char* json_line, void* user);

SEMRL_API const char* semrl_version(void);
SEMRL_API const char* semrl_last_error(void);
SEMRL_API const char* semrl_status_name(semrl_status status);

/* ---- Configuration ---------------------------------------------------- */

typedef struct semrl_config semrl_config;

SEMRL_API semrl_status semrl_config_load(const char* path, semrl_config** out);
SEMRL_API semrl_status semrl_config_parse(const char* text, semrl_config** out);
/* Overrides "section.key"; the config is re-validated. */
SEMRL_API semrl_status semrl_config_set(semrl_config* cfg, const char* key, const char* value);
SEMRL_API semrl_status semrl_config_hash(const semrl_config* cfg, uint64_t* out);
/* Resolved config text with every key. */
SEMRL_API semrl_status semrl_config_dump(const semrl_config* cfg, char* buf, size_t cap,
                                         size_t* needed);
/* Resolved value of one "section.key". */
SEMRL_API semrl_status semrl_config_get(const semrl_config* cfg, const char* key, char* buf,
                                        size_t cap, size_t* needed);
/* Seeds listed under run.seeds. *count receives the full count. */
SEMRL_API semrl_status semrl_config_seeds(const semrl_config* cfg, uint64_t* buf, size_t cap,
                                          size_t* count);
SEMRL_API void semrl_config_free(semrl_config* cfg);

/* ---- Harness operations ----------------------------------------------- */
/* `models` entries are "label=path" or a checkpoint path. `log` may be NULL. */

SEMRL_API semrl_status semrl_preprocess(const semrl_config* cfg, const char* out_dir,
                                        semrl_log_fn log, void* user);
/* Writes <run.output_dir>/seed-<seed>; the run directory path goes to buf. */
SEMRL_API semrl_status semrl_train(const semrl_config* cfg, uint64_t seed, char* run_dir,
                                   size_t cap, semrl_log_fn log, void* user);
/* channel is "awgn" or "fading". passes 0 uses eval.passes. */
SEMRL_API semrl_status semrl_evaluate(const semrl_config* cfg, const char* const* models,
                                      size_t n_models, const char* channel, double snr_db,
                                      size_t passes, uint64_t seed, const char* out_dir,
                                      semrl_log_fn log, void* user);
/* snrs ("0:20:2" or "0,10,20") and channels ("awgn,fading") may be NULL to
 * use eval.snrs and eval.channels. */
SEMRL_API semrl_status semrl_sweep_snr(const semrl_config* cfg, const char* const* models,
                                       size_t n_models, const char* snrs, const char* channels,
                                       const char* out_dir, semrl_log_fn log, void* user);
SEMRL_API semrl_status semrl_degradation(const semrl_config* cfg, const char* const* models,
                                         size_t n_models, double snr_db, const char* out_dir,
                                         semrl_log_fn log, void* user);
/* From report.json files written by semrl_evaluate on each channel. */
SEMRL_API semrl_status semrl_degradation_reports(const char* awgn_report,
                                                 const char* fading_report, const char* out_dir);
SEMRL_API semrl_status semrl_image_demo(const semrl_config* cfg, uint64_t seed,
                                        const char* out_dir, semrl_log_fn log, void* user);
/* goldens may be NULL. *failed receives the number of failing checks. */
SEMRL_API semrl_status semrl_selftest(const char* goldens, size_t* failed, semrl_log_fn log,
                                      void* user);

/* ---- Metrics ----------------------------------------------------------- */
/* Token ids are vocabulary ids; PAD (0), SOS (1) and EOS (2) are ignored,
 * and reading stops at the first EOS. */

SEMRL_API semrl_status semrl_bleu(const int32_t* candidate, size_t n_candidate,
                                  const int32_t* reference, size_t n_reference, int order,
                                  double* out);
SEMRL_API semrl_status semrl_wer(const int32_t* candidate, size_t n_candidate,
                                 const int32_t* reference, size_t n_reference, double* out);

typedef struct semrl_idf semrl_idf;

/* Document frequencies over `count` reference sentences. */
SEMRL_API semrl_status semrl_idf_build(const int32_t* const* references, const size_t* lengths,
                                       size_t count, semrl_idf** out);
SEMRL_API semrl_status semrl_cider_d(const semrl_idf* idf, const int32_t* candidate,
                                     size_t n_candidate, const int32_t* reference,
                                     size_t n_reference, double* out);
SEMRL_API void semrl_idf_free(semrl_idf* idf);

/* ---- Channel ----------------------------------------------------------- */

/* y = x * sqrt(n / sum x^2). */
SEMRL_API semrl_status semrl_power_normalize(const double* x, size_t n, double* y);
/* One block through "awgn" or "fading" at snr_db; deterministic in seed. */
SEMRL_API semrl_status semrl_channel_transmit(const char* kind, double snr_db, uint64_t seed,
                                              const double* x, size_t n, double* y);

/* ---- Reports ----------------------------------------------------------- */

/* 100 * (awgn - fading) / awgn. */
SEMRL_API semrl_status semrl_percent_degradation(double awgn, double fading, double* out);
/* One decimal and a percent sign. */
SEMRL_API semrl_status semrl_format_percent(double percent, char* buf, size_t cap,
                                            size_t* needed);

#ifdef __cplusplus
}
#endif

#endif /* SEMRL_SEMRL_H_ */

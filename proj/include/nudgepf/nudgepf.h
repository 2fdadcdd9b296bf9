// Copyright 2026 The nudgepf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/* C interface to the nudged particle filter library. */
#ifndef NUDGEPF_NUDGEPF_H
#define NUDGEPF_NUDGEPF_H

#include <stddef.h>
#include <stdint.h>

#if defined(NUDGEPF_BUILDING_LIBRARY)
#define NUDGEPF_API __attribute__((visibility("default")))
#else
#define NUDGEPF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum nudgepf_status {
  NUDGEPF_OK = 0,
  NUDGEPF_ERR_CONFIG = 1,
  NUDGEPF_ERR_RUN = 2,
  NUDGEPF_ERR_IO = 3,
  NUDGEPF_ERR_ARGUMENT = 4
} nudgepf_status;

typedef struct nudgepf_config nudgepf_config;
typedef struct nudgepf_record nudgepf_record;
typedef struct nudgepf_mc_result nudgepf_mc_result;

/* Called after each (initial condition, run) pair; may come from a worker thread. */
typedef void (*nudgepf_progress_fn)(size_t done, size_t total, void* user);

NUDGEPF_API const char* nudgepf_version(void);

/* Message of the last failed call on this thread, "" if none. */
NUDGEPF_API const char* nudgepf_last_error(void);

/* Strings returned through char** are owned by the caller. */
NUDGEPF_API void nudgepf_string_free(char* s);

NUDGEPF_API nudgepf_status nudgepf_config_default(nudgepf_config** out);
NUDGEPF_API nudgepf_status nudgepf_config_load(const char* path, nudgepf_config** out);
NUDGEPF_API nudgepf_status nudgepf_config_parse(const char* yaml, nudgepf_config** out);
/* Sets a dotted key such as "nudging.subintervals"; the value is YAML text. */
NUDGEPF_API nudgepf_status nudgepf_config_set(nudgepf_config* config, const char* key, const char* value);
NUDGEPF_API nudgepf_status nudgepf_config_seed(const nudgepf_config* config, uint64_t* seed);
NUDGEPF_API nudgepf_status nudgepf_config_dump(const nudgepf_config* config, char** out);
NUDGEPF_API void nudgepf_config_free(nudgepf_config* config);

/* Runs the configured filter. A run that aborts mid-way still yields a record
   and returns NUDGEPF_ERR_RUN. */
NUDGEPF_API nudgepf_status nudgepf_run(const nudgepf_config* config, nudgepf_record** out);
NUDGEPF_API nudgepf_status nudgepf_record_failed(const nudgepf_record* record, int* failed);
/* Names: rmse, avg_ness, avg_prior_ness, mean_control, max_control,
   rollback_fraction, mean_ratio, max_ratio, mean_applied_ratio,
   max_applied_ratio, realization_steps, max_batches_used,
   runtime_seconds, truth_seconds, variational_seconds, nudging_seconds, other_seconds. */
NUDGEPF_API nudgepf_status nudgepf_record_metric(const nudgepf_record* record, const char* name, double* value);
/* Writes record.csv and meta.json into dir. */
NUDGEPF_API nudgepf_status nudgepf_record_write(const nudgepf_record* record, const char* dir);
NUDGEPF_API void nudgepf_record_free(nudgepf_record* record);

/* ics: "all", "star" or a comma list such as "star,3,7". */
NUDGEPF_API nudgepf_status nudgepf_mc_run(
    const nudgepf_config* config,
    const char* ics,
    size_t runs_per_ic,
    uint64_t base_seed,
    unsigned jobs,
    nudgepf_progress_fn progress,
    void* user,
    nudgepf_mc_result** out);
NUDGEPF_API nudgepf_status nudgepf_mc_failures(const nudgepf_mc_result* result, size_t* failures);
/* Writes summary.csv, runs.csv and meta.json into dir. */
NUDGEPF_API nudgepf_status nudgepf_mc_write(const nudgepf_mc_result* result, const char* dir);
NUDGEPF_API void nudgepf_mc_free(nudgepf_mc_result* result);

/* Plain-text tables for an output directory. */
NUDGEPF_API nudgepf_status nudgepf_report(const char* dir, char** out);

#ifdef __cplusplus
}
#endif

#endif /* NUDGEPF_NUDGEPF_H */

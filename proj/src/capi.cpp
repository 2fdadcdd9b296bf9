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

#include "nudgepf/nudgepf.h"

#include <cstring>
#include <exception>
#include <filesystem>
#include <new>
#include <string>
#include <string_view>

#include "nudgepf/config.hpp"
#include "nudgepf/experiment.hpp"
#include "nudgepf/monte_carlo.hpp"
#include "nudgepf/record_io.hpp"
#include "nudgepf/report.hpp"

struct nudgepf_config {
  nudgepf::ExperimentConfig value;
};

struct nudgepf_record {
  nudgepf::ExperimentConfig config;
  nudgepf::ExperimentRecord record;
  nudgepf::RecordMetrics metrics;
};

struct nudgepf_mc_result {
  nudgepf::ExperimentConfig config;
  nudgepf::McOptions options;
  nudgepf::McSummary summary;
};

namespace {

thread_local std::string last_error;

nudgepf_status fail(nudgepf_status status, const std::string& message) {
  last_error = message;
  return status;
}

// Maps exceptions escaping the core to status codes.
template <typename F>
nudgepf_status guarded(nudgepf_status default_status, F&& body) {
  try {
    last_error.clear();
    return body();
  } catch (const nudgepf::ConfigError& e) {
    return fail(NUDGEPF_ERR_CONFIG, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(NUDGEPF_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(NUDGEPF_ERR_RUN, "out of memory");
  } catch (const std::exception& e) {
    return fail(default_status, e.what());
  }
}

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* nudgepf_version(void) { return nudgepf::kVersion; }

const char* nudgepf_last_error(void) { return last_error.c_str(); }

void nudgepf_string_free(char* s) { delete[] s; }

nudgepf_status nudgepf_config_default(nudgepf_config** out) {
  if (out == nullptr) {
    return fail(NUDGEPF_ERR_ARGUMENT, "null output pointer");
  }
  return guarded(NUDGEPF_ERR_CONFIG, [&] {
    *out = new nudgepf_config{};
    return NUDGEPF_OK;
  });
}

nudgepf_status nudgepf_config_load(const char* path, nudgepf_config** out) {
  if (path == nullptr || out == nullptr) {
    return fail(NUDGEPF_ERR_ARGUMENT, "null argument");
  }
  return guarded(NUDGEPF_ERR_CONFIG, [&] {
    *out = new nudgepf_config{nudgepf::load_config(path)};
    return NUDGEPF_OK;
  });
}

nudgepf_status nudgepf_config_parse(const char* yaml, nudgepf_config** out) {
  if (yaml == nullptr || out == nullptr) {
    return fail(NUDGEPF_ERR_ARGUMENT, "null argument");
  }
  return guarded(NUDGEPF_ERR_CONFIG, [&] {
    *out = new nudgepf_config{nudgepf::parse_config(yaml)};
    return NUDGEPF_OK;
  });
}

nudgepf_status nudgepf_config_set(nudgepf_config* config, const char* key, const char* value) {
  if (config == nullptr || key == nullptr || value == nullptr) {
    return fail(NUDGEPF_ERR_ARGUMENT, "null argument");
  }
  return guarded(NUDGEPF_ERR_CONFIG, [&] {
    nudgepf::ExperimentConfig updated = config->value;
    nudgepf::apply_override(updated, key, value);
    nudgepf::validate(updated);
    config->value = std::move(updated);
    return NUDGEPF_OK;
  });
}

nudgepf_status nudgepf_config_seed(const nudgepf_config* config, uint64_t* seed) {
  if (config == nullptr || seed == nullptr) {
    return fail(NUDGEPF_ERR_ARGUMENT, "null argument");
  }
  *seed = config->value.seed;
  return NUDGEPF_OK;
}

nudgepf_status nudgepf_config_dump(const nudgepf_config* config, char** out) {
  if (config == nullptr || out == nullptr) {
    return fail(NUDGEPF_ERR_ARGUMENT, "null argument");
  }
  return guarded(NUDGEPF_ERR_CONFIG, [&] {
    *out = copy_string(nudgepf::dump_config(config->value));
    return NUDGEPF_OK;
  });
}

void nudgepf_config_free(nudgepf_config* config) { delete config; }

nudgepf_status nudgepf_run(const nudgepf_config* config, nudgepf_record** out) {
  if (config == nullptr || out == nullptr) {
    return fail(NUDGEPF_ERR_ARGUMENT, "null argument");
  }
  *out = nullptr;
  return guarded(NUDGEPF_ERR_RUN, [&] {
    nudgepf::validate(config->value);
    auto* handle = new nudgepf_record{config->value, nudgepf::run_experiment(config->value), {}};
    handle->metrics = nudgepf::compute_metrics(handle->record);
    *out = handle;
    if (handle->record.failed) {
      return fail(NUDGEPF_ERR_RUN, handle->record.failure);
    }
    return NUDGEPF_OK;
  });
}

nudgepf_status nudgepf_record_failed(const nudgepf_record* record, int* failed) {
  if (record == nullptr || failed == nullptr) {
    return fail(NUDGEPF_ERR_ARGUMENT, "null argument");
  }
  *failed = record->record.failed ? 1 : 0;
  return NUDGEPF_OK;
}

nudgepf_status nudgepf_record_metric(const nudgepf_record* record, const char* name, double* value) {
  if (record == nullptr || name == nullptr || value == nullptr) {
    return fail(NUDGEPF_ERR_ARGUMENT, "null argument");
  }
  const auto& m = record->metrics;
  const auto& t = record->record.timings;
  const std::string_view key(name);
  if (key == "rmse") {
    *value = m.rmse;
  } else if (key == "avg_ness") {
    *value = m.avg_ness;
  } else if (key == "avg_prior_ness") {
    *value = m.avg_prior_ness;
  } else if (key == "mean_control") {
    *value = m.mean_control;
  } else if (key == "max_control") {
    *value = m.max_control;
  } else if (key == "rollback_fraction") {
    *value = m.rollback_fraction;
  } else if (key == "mean_ratio") {
    *value = m.mean_ratio;
  } else if (key == "max_ratio") {
    *value = m.max_ratio;
  } else if (key == "mean_applied_ratio") {
    *value = m.mean_applied_ratio;
  } else if (key == "max_applied_ratio") {
    *value = m.max_applied_ratio;
  } else if (key == "realization_steps") {
    *value = static_cast<double>(m.realization_steps);
  } else if (key == "max_batches_used") {
    *value = m.max_batches_used;
  } else if (key == "runtime_seconds") {
    *value = t.filter_seconds;
  } else if (key == "truth_seconds") {
    *value = t.truth_seconds;
  } else if (key == "variational_seconds") {
    *value = t.variational_seconds;
  } else if (key == "nudging_seconds") {
    *value = t.nudging_seconds;
  } else if (key == "other_seconds") {
    *value = t.other_seconds;
  } else {
    return fail(NUDGEPF_ERR_ARGUMENT, "unknown metric '" + std::string(key) + "'");
  }
  return NUDGEPF_OK;
}

nudgepf_status nudgepf_record_write(const nudgepf_record* record, const char* dir) {
  if (record == nullptr || dir == nullptr) {
    return fail(NUDGEPF_ERR_ARGUMENT, "null argument");
  }
  return guarded(NUDGEPF_ERR_IO, [&] {
    nudgepf::write_run_output(record->config, record->record, dir);
    return NUDGEPF_OK;
  });
}

void nudgepf_record_free(nudgepf_record* record) { delete record; }

nudgepf_status nudgepf_mc_run(
    const nudgepf_config* config,
    const char* ics,
    size_t runs_per_ic,
    uint64_t base_seed,
    unsigned jobs,
    nudgepf_progress_fn progress,
    void* user,
    nudgepf_mc_result** out) {
  if (config == nullptr || ics == nullptr || out == nullptr) {
    return fail(NUDGEPF_ERR_ARGUMENT, "null argument");
  }
  if (runs_per_ic < 1) {
    return fail(NUDGEPF_ERR_ARGUMENT, "runs per initial condition must be at least 1");
  }
  *out = nullptr;
  nudgepf::McOptions options;
  try {
    options.ics = nudgepf::parse_ic_selection(ics);
  } catch (const std::exception& e) {
    return fail(NUDGEPF_ERR_ARGUMENT, e.what());
  }
  options.runs_per_ic = runs_per_ic;
  options.base_seed = base_seed;
  options.jobs = jobs;
  if (progress != nullptr) {
    options.progress = [progress, user](std::size_t done, std::size_t total) { progress(done, total, user); };
  }
  return guarded(NUDGEPF_ERR_RUN, [&] {
    nudgepf::validate(config->value);
    auto summary = nudgepf::run_monte_carlo(config->value, options);
    options.progress = nullptr;
    *out = new nudgepf_mc_result{config->value, options, std::move(summary)};
    return NUDGEPF_OK;
  });
}

nudgepf_status nudgepf_mc_failures(const nudgepf_mc_result* result, size_t* failures) {
  if (result == nullptr || failures == nullptr) {
    return fail(NUDGEPF_ERR_ARGUMENT, "null argument");
  }
  size_t count = 0;
  for (const auto& r : result->summary.runs) {
    count += r.failed ? 1 : 0;
  }
  *failures = count;
  return NUDGEPF_OK;
}

nudgepf_status nudgepf_mc_write(const nudgepf_mc_result* result, const char* dir) {
  if (result == nullptr || dir == nullptr) {
    return fail(NUDGEPF_ERR_ARGUMENT, "null argument");
  }
  return guarded(NUDGEPF_ERR_IO, [&] {
    nudgepf::write_mc_output(result->config, result->options, result->summary, dir);
    return NUDGEPF_OK;
  });
}

void nudgepf_mc_free(nudgepf_mc_result* result) { delete result; }

nudgepf_status nudgepf_report(const char* dir, char** out) {
  if (dir == nullptr || out == nullptr) {
    return fail(NUDGEPF_ERR_ARGUMENT, "null argument");
  }
  return guarded(NUDGEPF_ERR_IO, [&] {
    *out = copy_string(nudgepf::render_report(dir));
    return NUDGEPF_OK;
  });
}

}  // extern "C"

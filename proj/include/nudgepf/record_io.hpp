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

#ifndef NUDGEPF_RECORD_IO_HPP
#define NUDGEPF_RECORD_IO_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "nudgepf/config.hpp"
#include "nudgepf/experiment.hpp"

namespace nudgepf {

inline constexpr const char* kVersion = "1.0.0";

/// %.17g, with "nan", "inf" and "-inf" for non-finite values.
std::string format_double(double value);
/// Inverse of format_double. Throws std::invalid_argument on malformed input.
double parse_double(const std::string& text);

/// One row of the tidy time-series table. Scalars use particle = -1 or
/// component = -1 where the axis does not apply.
struct RecordRow {
  std::string series;
  double time = 0.0;
  int particle = -1;
  int component = -1;
  double value = 0.0;

  bool operator==(const RecordRow&) const = default;
};

/// Series: truth, observation, mean, state, weight_prior, weight_posterior,
/// ness_prior, ness_posterior, control_norm, nudge_ratio (computed control),
/// nudge_ratio_applied, nudge_ratio_mean. Control series are emitted only for
/// nudged filters; missing ratios are skipped.
std::vector<RecordRow> record_rows(const ExperimentRecord& record);

void write_record_csv(const std::vector<RecordRow>& rows, const std::filesystem::path& path);
std::vector<RecordRow> read_record_csv(const std::filesystem::path& path);

/// Run manifest: config echo, seeds, version, metrics and runtime split.
std::string run_meta_json(const ExperimentConfig& config, const ExperimentRecord& record);

/// Writes record.csv and meta.json into `dir`, creating it if needed.
void write_run_output(const ExperimentConfig& config, const ExperimentRecord& record, const std::filesystem::path& dir);

}  // namespace nudgepf

#endif  // NUDGEPF_RECORD_IO_HPP

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

#ifndef NUDGEPF_MONTE_CARLO_HPP
#define NUDGEPF_MONTE_CARLO_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "nudgepf/config.hpp"
#include "nudgepf/experiment.hpp"

namespace nudgepf {

struct InitialCondition {
  std::string label;
  Eigen::Vector3d mean;
};

/// The eleven initial-condition means of the robustness sweep; index 0 is "star".
const std::vector<InitialCondition>& sweep_initial_conditions();

/// "all", "star", or a comma list of labels/indices such as "star,1,4".
/// Throws std::invalid_argument on unknown entries.
std::vector<std::size_t> parse_ic_selection(std::string_view selection);

struct McRunResult {
  std::size_t ic = 0;
  std::size_t run = 0;
  FilterKind filter = FilterKind::kPf;
  std::uint64_t seed = 0;
  std::uint64_t truth_hash = 0;
  bool failed = false;
  std::string failure;
  RecordMetrics metrics;
  RunTimings timings;
};

struct McSummaryRow {
  std::size_t ic = 0;
  std::string label;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  FilterKind filter = FilterKind::kPf;
  /// Completed runs; failed ones are counted in `failures`.
  std::size_t runs = 0;
  std::size_t failures = 0;
  double avg_rmse = 0.0;
  double median_rmse = 0.0;
  double avg_ness = 0.0;
  double median_ness = 0.0;
  double avg_runtime = 0.0;
  double median_runtime = 0.0;
  double avg_ratio = 0.0;
  double median_ratio = 0.0;
  double median_applied_ratio = 0.0;
  double avg_variational_share = 0.0;
  int max_batches_used = 0;
};

struct McSummary {
  std::vector<McRunResult> runs;
  std::vector<McSummaryRow> rows;
};

struct McOptions {
  std::vector<std::size_t> ics = {0};
  std::size_t runs_per_ic = 1;
  std::uint64_t base_seed = 1;
  unsigned jobs = 1;
  /// Called after each (ic, run) finishes, from the worker thread.
  std::function<void(std::size_t done, std::size_t total)> progress;
};

/// Child seed of one (ic, run) pair.
std::uint64_t mc_child_seed(std::uint64_t base_seed, std::size_t ic, std::size_t run);

/// For each selected IC and run: one truth from the IC mean, one initial
/// ensemble around it, and every filter in `config.filters` on that pair.
McSummary run_monte_carlo(const ExperimentConfig& config, const McOptions& options);

/// Aggregates completed runs per (ic, filter); failed runs are only counted.
std::vector<McSummaryRow> summarize_runs(const std::vector<McRunResult>& runs);

double median(std::vector<double> values);

void write_runs_csv(const std::vector<McRunResult>& runs, const std::filesystem::path& path);
std::vector<McRunResult> read_runs_csv(const std::filesystem::path& path);
void write_summary_csv(const std::vector<McSummaryRow>& rows, const std::filesystem::path& path);
std::vector<McSummaryRow> read_summary_csv(const std::filesystem::path& path);

/// Writes summary.csv, runs.csv and meta.json into `dir`.
void write_mc_output(
    const ExperimentConfig& config, const McOptions& options, const McSummary& summary, const std::filesystem::path& dir);

}  // namespace nudgepf

#endif  // NUDGEPF_MONTE_CARLO_HPP

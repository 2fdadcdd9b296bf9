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

#include "nudgepf/monte_carlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "nudgepf/record_io.hpp"
#include "nudgepf/rng.hpp"

namespace nudgepf {

namespace {

using Table = std::vector<std::map<std::string, std::string>>;

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, sep)) {
    out.push_back(field);
  }
  if (!line.empty() && line.back() == sep) {
    out.emplace_back();
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t");
  return std::string(s.substr(first, last - first + 1));
}

void write_table(
    const std::vector<std::string>& header,
    const std::vector<std::vector<std::string>>& rows,
    const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  for (std::size_t c = 0; c < header.size(); ++c) {
    out << (c ? "," : "") << header[c];
  }
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << (c ? "," : "") << row[c];
    }
    out << '\n';
  }
}

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  std::string line;
  std::getline(in, line);
  const auto header = split(line, ',');
  Table table;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    const auto fields = split(line, ',');
    if (fields.size() != header.size()) {
      throw std::runtime_error(path.string() + ": malformed row: " + line);
    }
    auto& row = table.emplace_back();
    for (std::size_t c = 0; c < header.size(); ++c) {
      row[header[c]] = fields[c];
    }
  }
  return table;
}

const std::string& field(const std::map<std::string, std::string>& row, const std::string& key) {
  const auto it = row.find(key);
  if (it == row.end()) {
    throw std::runtime_error("missing column " + key);
  }
  return it->second;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  double s = 0.0;
  for (const double x : v) {
    s += x;
  }
  return s / static_cast<double>(v.size());
}

}  // namespace

const std::vector<InitialCondition>& sweep_initial_conditions() {
  static const std::vector<InitialCondition> ics = {
      {"star", {1.509, -1.531, 25.461}},
      {"1", {-3.622, 2.487, 29.784}},
      {"2", {-8.587, -14.288, 16.895}},
      {"3", {-14.411, -8.058, 40.440}},
      {"4", {14.418, 11.236, 37.915}},
      {"5", {4.133, 6.815, 14.316}},
      {"6", {-2.895, -5.123, 11.843}},
      {"7", {-5.802, -7.589, 20.507}},
      {"8", {10.347, 17.701, 17.250}},
      {"9", {3.072, -0.052, 26.056}},
      {"10", {1.909, -0.842, 24.846}},
  };
  return ics;
}

std::vector<std::size_t> parse_ic_selection(std::string_view selection) {
  const auto& ics = sweep_initial_conditions();
  const std::string text = trim(selection);
  if (text == "all") {
    std::vector<std::size_t> all(ics.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
      all[i] = i;
    }
    return all;
  }
  std::vector<std::size_t> picked;
  for (const auto& raw : split(text, ',')) {
    std::string item = trim(raw);
    if (!item.empty() && item.front() == '#') {
      item.erase(0, 1);
    }
    const auto it = std::find_if(ics.begin(), ics.end(), [&](const auto& ic) { return ic.label == item; });
    if (it == ics.end()) {
      throw std::invalid_argument("unknown initial condition '" + item + "' (expected all, star or 1..10)");
    }
    const auto index = static_cast<std::size_t>(it - ics.begin());
    if (std::find(picked.begin(), picked.end(), index) == picked.end()) {
      picked.push_back(index);
    }
  }
  if (picked.empty()) {
    throw std::invalid_argument("empty initial-condition selection");
  }
  return picked;
}

std::uint64_t mc_child_seed(std::uint64_t base_seed, std::size_t ic, std::size_t run) {
  return derive_seed({base_seed, static_cast<std::uint64_t>(ic), static_cast<std::uint64_t>(run)});
}

double median(std::vector<double> values) {
  if (values.empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

McSummary run_monte_carlo(const ExperimentConfig& config, const McOptions& options) {
  validate(config);
  if (options.runs_per_ic < 1) {
    throw std::invalid_argument("runs_per_ic must be at least 1");
  }
  const auto& ics = sweep_initial_conditions();
  for (const std::size_t ic : options.ics) {
    if (ic >= ics.size()) {
      throw std::invalid_argument("initial-condition index out of range");
    }
  }
  const std::size_t filters = config.filters.size();
  const std::size_t tasks = options.ics.size() * options.runs_per_ic;
  std::vector<McRunResult> results(tasks * filters);

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  auto worker = [&]() {
    for (std::size_t task = next++; task < tasks; task = next++) {
      const std::size_t ic = options.ics[task / options.runs_per_ic];
      const std::size_t run = task % options.runs_per_ic;
      ExperimentConfig cfg = config;
      cfg.truth_initial = ics[ic].mean;
      cfg.ensemble_mean = ics[ic].mean;
      const std::uint64_t seed = mc_child_seed(options.base_seed, ic, run);
      const TruthData truth = generate_truth_and_observations(cfg, seed);
      const std::uint64_t hash = observation_hash(truth);
      const ParticleEnsemble initial = sample_initial_ensemble(cfg, seed);
      for (std::size_t f = 0; f < filters; ++f) {
        const ExperimentRecord record = run_filter(cfg, cfg.filters[f], truth, initial, seed);
        McRunResult& out = results[task * filters + f];
        out.ic = ic;
        out.run = run;
        out.filter = cfg.filters[f];
        out.seed = seed;
        out.truth_hash = hash;
        out.failed = record.failed;
        out.failure = record.failure;
        out.metrics = compute_metrics(record);
        out.timings = record.timings;
      }
      const std::size_t finished = ++done;
      if (options.progress) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        options.progress(finished, tasks);
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(tasks)));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) {
      pool.emplace_back(worker);
    }
    for (auto& t : pool) {
      t.join();
    }
  }

  McSummary summary;
  summary.runs = std::move(results);
  summary.rows = summarize_runs(summary.runs);
  return summary;
}

std::vector<McSummaryRow> summarize_runs(const std::vector<McRunResult>& runs) {
  const auto& ics = sweep_initial_conditions();
  std::map<std::pair<std::size_t, int>, std::vector<const McRunResult*>> groups;
  for (const auto& r : runs) {
    groups[{r.ic, static_cast<int>(r.filter)}].push_back(&r);
  }
  std::vector<McSummaryRow> rows;
  for (const auto& [key, members] : groups) {
    McSummaryRow row;
    row.ic = key.first;
    row.label = key.first < ics.size() ? ics[key.first].label : std::to_string(key.first);
    row.mean = key.first < ics.size() ? ics[key.first].mean : Eigen::Vector3d::Zero();
    row.filter = static_cast<FilterKind>(key.second);
    std::vector<double> rmse, ness, runtime, ratio, applied, share;
    for (const McRunResult* r : members) {
      if (r->failed) {
        ++row.failures;
        continue;
      }
      ++row.runs;
      rmse.push_back(r->metrics.rmse);
      ness.push_back(r->metrics.avg_ness);
      runtime.push_back(r->timings.filter_seconds);
      ratio.push_back(r->metrics.mean_ratio);
      applied.push_back(r->metrics.mean_applied_ratio);
      share.push_back(r->timings.filter_seconds > 0 ? r->timings.variational_seconds / r->timings.filter_seconds : 0.0);
      row.max_batches_used = std::max(row.max_batches_used, r->metrics.max_batches_used);
    }
    row.avg_rmse = mean_of(rmse);
    row.median_rmse = median(rmse);
    row.avg_ness = mean_of(ness);
    row.median_ness = median(ness);
    row.avg_runtime = mean_of(runtime);
    row.median_runtime = median(runtime);
    row.avg_ratio = mean_of(ratio);
    row.median_ratio = median(ratio);
    row.median_applied_ratio = median(applied);
    row.avg_variational_share = mean_of(share);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_runs_csv(const std::vector<McRunResult>& runs, const std::filesystem::path& path) {
  const std::vector<std::string> header = {
      "ic", "label", "run", "filter", "seed", "truth_hash", "failed", "rmse", "avg_ness", "avg_prior_ness",
      "mean_control", "max_control", "rollback_fraction", "mean_ratio", "max_ratio", "mean_applied_ratio", "max_applied_ratio", "realization_steps",
      "max_batches_used", "unconverged", "resample_count", "collapse_count", "filter_seconds", "truth_seconds",
      "variational_seconds", "nudging_seconds", "other_seconds"};
  const auto& ics = sweep_initial_conditions();
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : runs) {
    const auto& m = r.metrics;
    const auto& t = r.timings;
    rows.push_back({
        std::to_string(r.ic), r.ic < ics.size() ? ics[r.ic].label : std::to_string(r.ic), std::to_string(r.run),
        to_string(r.filter), std::to_string(r.seed), std::to_string(r.truth_hash), r.failed ? "1" : "0",
        format_double(m.rmse), format_double(m.avg_ness), format_double(m.avg_prior_ness),
        format_double(m.mean_control), format_double(m.max_control), format_double(m.rollback_fraction),
        format_double(m.mean_ratio), format_double(m.max_ratio), format_double(m.mean_applied_ratio),
        format_double(m.max_applied_ratio), std::to_string(m.realization_steps),
        std::to_string(m.max_batches_used), std::to_string(m.unconverged), std::to_string(m.resample_count),
        std::to_string(m.collapse_count), format_double(t.filter_seconds), format_double(t.truth_seconds),
        format_double(t.variational_seconds), format_double(t.nudging_seconds), format_double(t.other_seconds)});
  }
  write_table(header, rows, path);
}

std::vector<McRunResult> read_runs_csv(const std::filesystem::path& path) {
  std::vector<McRunResult> runs;
  for (const auto& row : read_table(path)) {
    McRunResult r;
    r.ic = std::stoul(field(row, "ic"));
    r.run = std::stoul(field(row, "run"));
    r.filter = parse_filter_kind(field(row, "filter"));
    r.seed = std::stoull(field(row, "seed"));
    r.truth_hash = std::stoull(field(row, "truth_hash"));
    r.failed = field(row, "failed") == "1";
    auto& m = r.metrics;
    m.rmse = parse_double(field(row, "rmse"));
    m.avg_ness = parse_double(field(row, "avg_ness"));
    m.avg_prior_ness = parse_double(field(row, "avg_prior_ness"));
    m.mean_control = parse_double(field(row, "mean_control"));
    m.max_control = parse_double(field(row, "max_control"));
    m.rollback_fraction = parse_double(field(row, "rollback_fraction"));
    m.mean_ratio = parse_double(field(row, "mean_ratio"));
    m.max_ratio = parse_double(field(row, "max_ratio"));
    m.mean_applied_ratio = parse_double(field(row, "mean_applied_ratio"));
    m.max_applied_ratio = parse_double(field(row, "max_applied_ratio"));
    m.realization_steps = std::stoull(field(row, "realization_steps"));
    m.max_batches_used = std::stoi(field(row, "max_batches_used"));
    m.unconverged = std::stoull(field(row, "unconverged"));
    m.resample_count = std::stoull(field(row, "resample_count"));
    m.collapse_count = std::stoull(field(row, "collapse_count"));
    auto& t = r.timings;
    t.filter_seconds = parse_double(field(row, "filter_seconds"));
    m.runtime_seconds = t.filter_seconds;
    t.truth_seconds = parse_double(field(row, "truth_seconds"));
    t.variational_seconds = parse_double(field(row, "variational_seconds"));
    t.nudging_seconds = parse_double(field(row, "nudging_seconds"));
    t.other_seconds = parse_double(field(row, "other_seconds"));
    runs.push_back(std::move(r));
  }
  return runs;
}

void write_summary_csv(const std::vector<McSummaryRow>& rows, const std::filesystem::path& path) {
  const std::vector<std::string> header = {
      "ic", "label", "mu_x", "mu_y", "mu_z", "filter", "runs", "failures", "avg_rmse", "median_rmse", "avg_ness",
      "median_ness", "avg_runtime", "median_runtime", "avg_ratio", "median_ratio", "median_applied_ratio", "avg_variational_share",
      "max_batches_used"};
  std::vector<std::vector<std::string>> out;
  for (const auto& r : rows) {
    out.push_back({
        std::to_string(r.ic), r.label, format_double(r.mean[0]), format_double(r.mean[1]), format_double(r.mean[2]),
        to_string(r.filter), std::to_string(r.runs), std::to_string(r.failures), format_double(r.avg_rmse),
        format_double(r.median_rmse), format_double(r.avg_ness), format_double(r.median_ness),
        format_double(r.avg_runtime), format_double(r.median_runtime), format_double(r.avg_ratio),
        format_double(r.median_ratio), format_double(r.median_applied_ratio), format_double(r.avg_variational_share), std::to_string(r.max_batches_used)});
  }
  write_table(header, out, path);
}

std::vector<McSummaryRow> read_summary_csv(const std::filesystem::path& path) {
  std::vector<McSummaryRow> rows;
  for (const auto& row : read_table(path)) {
    McSummaryRow r;
    r.ic = std::stoul(field(row, "ic"));
    r.label = field(row, "label");
    r.mean = {parse_double(field(row, "mu_x")), parse_double(field(row, "mu_y")), parse_double(field(row, "mu_z"))};
    r.filter = parse_filter_kind(field(row, "filter"));
    r.runs = std::stoul(field(row, "runs"));
    r.failures = std::stoul(field(row, "failures"));
    r.avg_rmse = parse_double(field(row, "avg_rmse"));
    r.median_rmse = parse_double(field(row, "median_rmse"));
    r.avg_ness = parse_double(field(row, "avg_ness"));
    r.median_ness = parse_double(field(row, "median_ness"));
    r.avg_runtime = parse_double(field(row, "avg_runtime"));
    r.median_runtime = parse_double(field(row, "median_runtime"));
    r.avg_ratio = parse_double(field(row, "avg_ratio"));
    r.median_ratio = parse_double(field(row, "median_ratio"));
    r.median_applied_ratio = parse_double(field(row, "median_applied_ratio"));
    r.avg_variational_share = parse_double(field(row, "avg_variational_share"));
    r.max_batches_used = std::stoi(field(row, "max_batches_used"));
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_mc_output(
    const ExperimentConfig& config, const McOptions& options, const McSummary& summary, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_summary_csv(summary.rows, dir / "summary.csv");
  write_runs_csv(summary.runs, dir / "runs.csv");

  nlohmann::ordered_json failures = nlohmann::ordered_json::array();
  for (const auto& r : summary.runs) {
    if (r.failed) {
      failures.push_back({{"ic", r.ic}, {"run", r.run}, {"filter", to_string(r.filter)}, {"failure", r.failure}});
    }
  }
  nlohmann::ordered_json filters = nlohmann::ordered_json::array();
  for (const auto f : config.filters) {
    filters.push_back(to_string(f));
  }
  const nlohmann::ordered_json meta = {
      {"kind", "mc"},
      {"version", kVersion},
      {"base_seed", options.base_seed},
      {"runs_per_ic", options.runs_per_ic},
      {"ics", options.ics},
      {"jobs", options.jobs},
      {"filters", filters},
      {"failures", failures},
      {"config", dump_config(config)},
  };
  std::ofstream out(dir / "meta.json");
  if (!out) {
    throw std::runtime_error("cannot open " + (dir / "meta.json").string() + " for writing");
  }
  out << meta.dump(2) << '\n';
}

}  // namespace nudgepf

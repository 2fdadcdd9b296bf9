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

#include "nudgepf/record_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace nudgepf {

namespace {

using nlohmann::ordered_json;

void add_vector_rows(
    std::vector<RecordRow>& rows, const std::string& series, double time, int particle, const Eigen::VectorXd& v) {
  for (Eigen::Index c = 0; c < v.size(); ++c) {
    rows.push_back({series, time, particle, static_cast<int>(c), v[c]});
  }
}

bool is_nudged(FilterKind kind) { return kind != FilterKind::kPf; }

ordered_json metrics_json(const RecordMetrics& m) {
  return {
      {"rmse", m.rmse},
      {"avg_ness", m.avg_ness},
      {"avg_prior_ness", m.avg_prior_ness},
      {"mean_control", m.mean_control},
      {"max_control", m.max_control},
      {"rollback_fraction", m.rollback_fraction},
      {"mean_ratio", m.mean_ratio},
      {"max_ratio", m.max_ratio},
      {"mean_applied_ratio", m.mean_applied_ratio},
      {"max_applied_ratio", m.max_applied_ratio},
      {"realization_steps", m.realization_steps},
      {"max_batches_used", m.max_batches_used},
      {"unconverged", m.unconverged},
      {"resample_count", m.resample_count},
      {"collapse_count", m.collapse_count},
      {"runtime_seconds", m.runtime_seconds},
  };
}

// nlohmann writes non-finite numbers as null.
ordered_json number_or_null(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) {
    return "nan";
  }
  if (std::isinf(value)) {
    return value > 0 ? "inf" : "-inf";
  }
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

double parse_double(const std::string& text) {
  std::size_t used = 0;
  const double v = std::stod(text, &used);
  if (used != text.size()) {
    throw std::invalid_argument("malformed number: " + text);
  }
  return v;
}

std::vector<RecordRow> record_rows(const ExperimentRecord& record) {
  std::vector<RecordRow> rows;
  const bool nudged = is_nudged(record.filter);
  for (std::size_t k = 0; k < record.truth.size(); ++k) {
    add_vector_rows(rows, "truth", record.times[k], -1, record.truth[k]);
  }
  for (std::size_t k = 0; k < record.observations.size(); ++k) {
    add_vector_rows(rows, "observation", record.obs_times[k], -1, record.observations[k]);
  }
  for (std::size_t k = 0; k < record.mean_path.size(); ++k) {
    add_vector_rows(rows, "mean", record.times[k], -1, record.mean_path[k]);
  }
  for (std::size_t k = 0; k < record.particle_states.size(); ++k) {
    for (std::size_t i = 0; i < record.particle_states[k].size(); ++i) {
      add_vector_rows(rows, "state", record.times[k], static_cast<int>(i), record.particle_states[k][i]);
    }
  }
  for (const auto& cycle : record.cycles) {
    for (Eigen::Index i = 0; i < cycle.prior.weights.size(); ++i) {
      rows.push_back({"weight_prior", cycle.time, static_cast<int>(i), -1, cycle.prior.weights[i]});
    }
    for (Eigen::Index i = 0; i < cycle.posterior.weights.size(); ++i) {
      rows.push_back({"weight_posterior", cycle.time, static_cast<int>(i), -1, cycle.posterior.weights[i]});
    }
    rows.push_back({"ness_prior", cycle.time, -1, -1, cycle.prior_ness});
    rows.push_back({"ness_posterior", cycle.time, -1, -1, cycle.posterior_ness});
  }
  if (nudged) {
    const std::size_t filled = record.mean_path.size();
    for (std::size_t k = 1; k < filled; ++k) {
      const auto r = static_cast<Eigen::Index>(k);
      double sum = 0.0;
      int count = 0;
      for (Eigen::Index i = 0; i < record.control_norm.cols(); ++i) {
        rows.push_back({"control_norm", record.times[k], static_cast<int>(i), -1, record.control_norm(r, i)});
        const double proposed = record.proposed_ratio(r, i);
        if (!std::isnan(proposed)) {
          rows.push_back({"nudge_ratio", record.times[k], static_cast<int>(i), -1, proposed});
          sum += proposed;
          ++count;
        }
        const double applied = record.nudge_ratio(r, i);
        if (!std::isnan(applied)) {
          rows.push_back({"nudge_ratio_applied", record.times[k], static_cast<int>(i), -1, applied});
        }
      }
      if (count > 0) {
        rows.push_back({"nudge_ratio_mean", record.times[k], -1, -1, sum / count});
      }
    }
  }
  return rows;
}

void write_record_csv(const std::vector<RecordRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  out << "series,time,particle,component,value\n";
  for (const auto& r : rows) {
    out << r.series << ',' << format_double(r.time) << ',' << r.particle << ',' << r.component << ','
        << format_double(r.value) << '\n';
  }
  if (!out) {
    throw std::runtime_error("failed writing " + path.string());
  }
}

std::vector<RecordRow> read_record_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  std::string line;
  std::getline(in, line);
  if (line != "series,time,particle,component,value") {
    throw std::runtime_error(path.string() + ": unexpected header");
  }
  std::vector<RecordRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    std::stringstream ss(line);
    std::string series, time, particle, component, value;
    if (!std::getline(ss, series, ',') || !std::getline(ss, time, ',') || !std::getline(ss, particle, ',') ||
        !std::getline(ss, component, ',') || !std::getline(ss, value)) {
      throw std::runtime_error(path.string() + ": malformed row: " + line);
    }
    rows.push_back({series, parse_double(time), std::stoi(particle), std::stoi(component), parse_double(value)});
  }
  return rows;
}

std::string run_meta_json(const ExperimentConfig& config, const ExperimentRecord& record) {
  const RecordMetrics metrics = compute_metrics(record);
  TruthData obs;
  obs.obs_times = record.obs_times;
  obs.observations = record.observations;

  ordered_json cycles = ordered_json::array();
  for (const auto& c : record.cycles) {
    ordered_json entry = {
        {"time", c.time},
        {"prior_ness", c.prior_ness},
        {"posterior_ness", c.posterior_ness},
        {"resampled", c.resampled},
        {"collapsed", c.collapsed},
        {"failed_particles", c.failed_particles},
        {"controls", c.controls},
        {"rollbacks", c.rollbacks},
        {"realization_steps", c.realization_steps},
        {"max_batches_used", c.max_batches_used},
        {"unconverged", c.unconverged},
    };
    if (c.variational.ran) {
      entry["variational"] = {
          {"solves", c.variational.solves},
          {"status", c.variational.status},
          {"iterations", c.variational.iterations},
          {"initial_cost", number_or_null(c.variational.initial_cost)},
          {"final_cost", number_or_null(c.variational.final_cost)},
          {"terminal_residual", number_or_null(c.variational.terminal_residual)},
      };
    }
    cycles.push_back(std::move(entry));
  }

  const ordered_json meta = {
      {"kind", "run"},
      {"version", kVersion},
      {"filter", to_string(record.filter)},
      {"seed", record.seed},
      {"particles", record.particles},
      {"observation_hash", observation_hash(obs)},
      {"failed", record.failed},
      {"failure", record.failure},
      {"metrics", metrics_json(metrics)},
      {"runtime",
       {{"truth_seconds", record.timings.truth_seconds},
        {"filter_seconds", record.timings.filter_seconds},
        {"variational_seconds", record.timings.variational_seconds},
        {"nudging_seconds", record.timings.nudging_seconds},
        {"other_seconds", record.timings.other_seconds}}},
      {"cycles", cycles},
      {"config", dump_config(config)},
  };
  return meta.dump(2);
}

void write_run_output(const ExperimentConfig& config, const ExperimentRecord& record, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_record_csv(record_rows(record), dir / "record.csv");
  std::ofstream meta(dir / "meta.json");
  if (!meta) {
    throw std::runtime_error("cannot open " + (dir / "meta.json").string() + " for writing");
  }
  meta << run_meta_json(config, record) << '\n';
}

}  // namespace nudgepf

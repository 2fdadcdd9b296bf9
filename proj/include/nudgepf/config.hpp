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

#ifndef NUDGEPF_CONFIG_HPP
#define NUDGEPF_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "nudgepf/cycle.hpp"
#include "nudgepf/nudging.hpp"
#include "nudgepf/sde.hpp"
#include "nudgepf/variational.hpp"

namespace nudgepf {

enum class FilterKind { kPf, kNpf, kVarNpf };

std::string to_string(FilterKind kind);

/// Accepts "pf", "npf", "var_npf" and "var-npf".
FilterKind parse_filter_kind(std::string_view name);

/// Stable tag used when deriving a filter's random streams.
std::uint64_t filter_tag(FilterKind kind);

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Red-star initial condition of the Lorenz-63 experiments.
Eigen::Vector3d default_initial_state();

struct ExperimentConfig {
  FilterKind filter = FilterKind::kVarNpf;
  /// Filters run side by side by the Monte Carlo driver.
  std::vector<FilterKind> filters = {FilterKind::kPf, FilterKind::kNpf, FilterKind::kVarNpf};
  std::uint64_t seed = 1;

  int particles = 10;
  double dt = 0.01;
  double obs_interval = 0.5;
  double final_time = 3.5;

  L63Params l63;
  Eigen::MatrixXd diffusion = default_l63_diffusion();

  Eigen::VectorXd truth_initial = default_initial_state();
  /// Initial ensemble ~ N(ensemble_mean, ensemble_variance I).
  Eigen::VectorXd ensemble_mean = default_initial_state();
  double ensemble_variance = 2.0;

  Eigen::MatrixXd obs_operator = Eigen::MatrixXd::Identity(3, 3);
  Eigen::MatrixXd obs_noise_covariance = 2.0 * Eigen::MatrixXd::Identity(3, 3);

  ResamplingPolicy resampling;
  NudgingConfig nudging;
  VariationalConfig variational;

  [[nodiscard]] std::size_t observation_count() const;
  [[nodiscard]] std::size_t steps_per_observation() const;
  [[nodiscard]] std::size_t total_steps() const;
};

/// Throws ConfigError describing the first violated constraint.
void validate(const ExperimentConfig& config);

/// Parses YAML text on top of the defaults. Unknown keys are rejected.
ExperimentConfig parse_config(std::string_view yaml_text);

ExperimentConfig load_config(const std::filesystem::path& path);

/// Sets one field addressed by a dotted key, e.g. ("nudging.subintervals", "7").
/// The value is YAML.
void apply_override(ExperimentConfig& config, std::string_view dotted_key, std::string_view yaml_value);

/// YAML rendering that parse_config reads back to an equal config.
std::string dump_config(const ExperimentConfig& config);

SdeModel build_model(const ExperimentConfig& config);
ObservationModel build_observation_model(const ExperimentConfig& config);

}  // namespace nudgepf

#endif  // NUDGEPF_CONFIG_HPP

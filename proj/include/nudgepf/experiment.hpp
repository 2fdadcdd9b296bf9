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

#ifndef NUDGEPF_EXPERIMENT_HPP
#define NUDGEPF_EXPERIMENT_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nudgepf/config.hpp"
#include "nudgepf/cycle.hpp"
#include "nudgepf/ensemble.hpp"

namespace nudgepf {

/// Hidden signal on the integrator grid and the observations drawn from it.
struct TruthData {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<double> obs_times;
  std::vector<Eigen::VectorXd> observations;
  double seconds = 0.0;
};

/// Simulates the truth from `config.truth_initial` and observes it every
/// obs_interval. Truth and observation noise come from streams no filter uses.
TruthData generate_truth_and_observations(const ExperimentConfig& config, std::uint64_t seed);

/// Samples N particles from N(config.ensemble_mean, ensemble_variance I).
ParticleEnsemble sample_initial_ensemble(const ExperimentConfig& config, std::uint64_t seed);

/// FNV-1a hash of the observation values, for checking paired runs.
std::uint64_t observation_hash(const TruthData& truth);

struct RunTimings {
  double truth_seconds = 0.0;
  double variational_seconds = 0.0;
  double nudging_seconds = 0.0;
  double other_seconds = 0.0;
  /// Wall clock of the filter alone, excluding truth generation.
  double filter_seconds = 0.0;
};

/// Summary of one assimilation cycle.
struct CycleRecord {
  double time = 0.0;
  ParticleEnsemble prior;
  ParticleEnsemble posterior;
  double prior_ness = 1.0;
  double posterior_ness = 1.0;
  bool resampled = false;
  bool collapsed = false;
  std::size_t failed_particles = 0;
  std::size_t rollbacks = 0;
  std::size_t controls = 0;
  std::size_t realization_steps = 0;
  int max_batches_used = 0;
  std::size_t unconverged = 0;
  VariationalSummary variational;
};

struct ExperimentRecord {
  FilterKind filter = FilterKind::kPf;
  std::uint64_t seed = 0;
  std::size_t particles = 0;

  /// Integrator grid, t = 0 .. t_f.
  std::vector<double> times;
  std::vector<Eigen::VectorXd> truth;
  std::vector<double> obs_times;
  std::vector<Eigen::VectorXd> observations;

  /// Weighted ensemble mean at every grid time.
  std::vector<Eigen::VectorXd> mean_path;
  /// Particle states at every grid time before any Bayes update, [time][particle].
  std::vector<std::vector<Eigen::VectorXd>> particle_states;
  /// Applied control norm per step (row 0 is t = 0), [time][particle].
  Eigen::MatrixXd control_norm;
  /// Nudging-to-Brownian displacement ratio, NaN where no control was applied.
  Eigen::MatrixXd nudge_ratio;
  /// Ratio of the computed control, including rolled-back ones.
  Eigen::MatrixXd proposed_ratio;

  std::vector<CycleRecord> cycles;
  /// Control solves, with the cycle they belong to.
  std::vector<std::pair<std::size_t, ControlRecord>> controls;

  RunTimings timings;
  bool failed = false;
  std::string failure;
};

/// sqrt of the mean over grid times and components of (mean - truth)^2.
double compute_rmse(const ExperimentRecord& record);

struct RecordMetrics {
  double rmse = 0.0;
  /// Time average of posterior nESS over observation times.
  double avg_ness = 0.0;
  double avg_prior_ness = 0.0;
  /// Over every computed control, rolled back or not.
  double mean_control = 0.0;
  double max_control = 0.0;
  double rollback_fraction = 0.0;
  /// Over every (step, particle) with a computed control, rolled back or not.
  double mean_ratio = 0.0;
  double max_ratio = 0.0;
  /// Over every (step, particle) with an applied control.
  double mean_applied_ratio = 0.0;
  double max_applied_ratio = 0.0;
  std::size_t realization_steps = 0;
  int max_batches_used = 0;
  std::size_t unconverged = 0;
  std::size_t resample_count = 0;
  std::size_t collapse_count = 0;
  double runtime_seconds = 0.0;
};

RecordMetrics compute_metrics(const ExperimentRecord& record);

/// Runs one filter over a fixed truth and initial ensemble.
ExperimentRecord run_filter(
    const ExperimentConfig& config,
    FilterKind kind,
    const TruthData& truth,
    const ParticleEnsemble& initial,
    std::uint64_t run_seed);

/// Generates truth and initial ensemble from `config.seed` and runs `config.filter`.
ExperimentRecord run_experiment(const ExperimentConfig& config);

}  // namespace nudgepf

#endif  // NUDGEPF_EXPERIMENT_HPP

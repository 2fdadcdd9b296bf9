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

#ifndef NUDGEPF_CYCLE_HPP
#define NUDGEPF_CYCLE_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nudgepf/ensemble.hpp"
#include "nudgepf/sde.hpp"

namespace nudgepf {

/// Random inputs consumed by one assimilation cycle.
struct CycleStreams {
  /// One path per particle covering the observation interval.
  std::vector<BrownianPath> paths;
  /// Root of the Feynman-Kac realization streams; unused by the bootstrap filter.
  std::uint64_t realization_seed = 0;
  /// Draw for systematic resampling.
  double resample_uniform = 0.0;
};

/// Draws the streams for cycle `cycle` of a filter run from `(run_seed, filter_tag, ...)`.
CycleStreams make_cycle_streams(
    std::uint64_t run_seed,
    std::uint64_t filter_tag,
    std::size_t cycle,
    std::size_t particles,
    Eigen::Index dimension,
    double dt,
    std::size_t steps);

struct ResamplingPolicy {
  bool enabled = true;
  /// Resample when N_eff < threshold * N.
  double threshold = 0.5;
};

/// One control solve for one particle and subinterval.
struct ControlRecord {
  std::size_t particle = 0;
  std::size_t subinterval = 0;
  /// Norm of the computed control, before any rollback.
  double control_norm = 0.0;
  double expected_log_rn = 0.0;
  bool rolled_back = false;
  bool underflow = false;
  bool converged = false;
  int batches = 0;
  std::size_t realizations = 0;
  /// Length of every realization used by the solve, in integrator steps.
  std::size_t horizon_steps = 0;
};

struct VariationalSummary {
  bool ran = false;
  int solves = 0;
  std::string status;
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  /// |h(X_dagger(t_{k+1})) - Y_{k+1}|.
  double terminal_residual = 0.0;
};

struct CycleDiagnostics {
  /// Ensemble at t_{k+1} before the Bayes update; nudged filters fold the
  /// Radon-Nikodym factors into these weights.
  ParticleEnsemble prior;
  /// Posterior before resampling.
  ParticleEnsemble posterior;
  double prior_ness = 1.0;
  double posterior_ness = 1.0;
  bool resampled = false;
  bool collapsed = false;
  std::size_t failed_particles = 0;

  /// Particle states at every integrator step of the interval, [step][particle], step 0 = t_k.
  std::vector<std::vector<Eigen::VectorXd>> trajectories;
  /// Weighted ensemble mean at steps 1..S; previous weights inside the interval, posterior at S.
  std::vector<Eigen::VectorXd> step_means;
  /// Norm of the applied control, [step - 1][particle].
  Eigen::MatrixXd control_norm;
  /// |u dt| / |sigma dW| per step; NaN where no control was applied.
  Eigen::MatrixXd nudge_ratio;
  /// Same ratio for the computed control whether or not it was rolled back;
  /// NaN only where no control was computed.
  Eigen::MatrixXd proposed_ratio;
  Eigen::VectorXd log_rn;

  std::vector<ControlRecord> controls;
  std::size_t realization_steps = 0;
  std::size_t rollbacks = 0;
  int max_batches_used = 0;
  std::size_t unconverged = 0;

  VariationalSummary variational;
  double variational_seconds = 0.0;
  double nudging_seconds = 0.0;
};

struct CycleResult {
  ParticleEnsemble ensemble;
  CycleDiagnostics diagnostics;
};

}  // namespace nudgepf

#endif  // NUDGEPF_CYCLE_HPP

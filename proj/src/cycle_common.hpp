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

#ifndef NUDGEPF_SRC_CYCLE_COMMON_HPP
#define NUDGEPF_SRC_CYCLE_COMMON_HPP

#include <cstddef>
#include <limits>

#include "nudgepf/cycle.hpp"

namespace nudgepf::detail {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// Checks the per-particle paths and returns the number of steps in [t_k, t_next].
std::size_t check_cycle_inputs(
    const ParticleEnsemble& ensemble, double t_k, double t_next, const CycleStreams& streams);

/// Allocates trajectories and per-step matrices for S steps.
void init_diagnostics(CycleDiagnostics& diag, const ParticleEnsemble& ensemble, std::size_t steps);

/// Bayes update, nESS bookkeeping, and conditional resampling shared by all filters.
///
/// `log_extra` holds the per-particle log factor (Radon-Nikodym derivative,
/// or -inf for a failed particle). The trajectories' last row are the prior
/// states at t_next.
ParticleEnsemble finish_cycle(
    const ParticleEnsemble& start,
    const Eigen::VectorXd& log_extra,
    const Eigen::VectorXd& observation,
    const ObservationModel& obs_model,
    double t_next,
    const CycleStreams& streams,
    const ResamplingPolicy& policy,
    CycleDiagnostics& diag);

}  // namespace nudgepf::detail

#endif  // NUDGEPF_SRC_CYCLE_COMMON_HPP

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

#ifndef NUDGEPF_VAR_NPF_HPP
#define NUDGEPF_VAR_NPF_HPP

#include <Eigen/Core>

#include "nudgepf/cycle.hpp"
#include "nudgepf/ensemble.hpp"
#include "nudgepf/nudging.hpp"
#include "nudgepf/sde.hpp"
#include "nudgepf/variational.hpp"

namespace nudgepf {

/// Variational pseudo-observation guided nudged cycle.
///
/// The ensemble moments at t_k and the observation define a variational
/// problem whose noise-free optimal path supplies a pseudo-observation at
/// every subinterval end. Each control solve then targets the next
/// pseudo-observation over a single subinterval, the last one included.
/// The terminal Bayes update uses the true observation unless
/// `reweight_against_pseudo` is set.
CycleResult var_npf_assimilation_cycle(
    const ParticleEnsemble& ensemble,
    const SdeModel& model,
    const ObservationModel& obs_model,
    const Eigen::VectorXd& observation,
    double t_k,
    double t_next,
    const NudgingConfig& nudging,
    const VariationalConfig& variational,
    const CycleStreams& streams,
    const ResamplingPolicy& policy = {});

}  // namespace nudgepf

#endif  // NUDGEPF_VAR_NPF_HPP

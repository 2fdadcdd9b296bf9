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

#ifndef NUDGEPF_BOOTSTRAP_PF_HPP
#define NUDGEPF_BOOTSTRAP_PF_HPP

#include <Eigen/Core>

#include "nudgepf/cycle.hpp"
#include "nudgepf/ensemble.hpp"
#include "nudgepf/sde.hpp"

namespace nudgepf {

/// Bootstrap cycle: advect every particle under the uncontrolled dynamics
/// from t_k to t_{k+1}, apply the Bayes update against `observation`, and
/// resample if the policy fires.
CycleResult pf_assimilation_cycle(
    const ParticleEnsemble& ensemble,
    const SdeModel& model,
    const ObservationModel& obs_model,
    const Eigen::VectorXd& observation,
    double t_k,
    double t_next,
    const CycleStreams& streams,
    const ResamplingPolicy& policy = {});

}  // namespace nudgepf

#endif  // NUDGEPF_BOOTSTRAP_PF_HPP

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

#include "nudgepf/var_npf.hpp"

#include <chrono>
#include <stdexcept>
#include <vector>

namespace nudgepf {

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
    const ResamplingPolicy& policy) {
  validate(nudging);
  validate(variational);
  const double dt = streams.paths.at(0).dt;
  const std::size_t steps = step_count(t_k, t_next, dt);
  const auto m = static_cast<std::size_t>(nudging.subintervals);
  if (steps % m != 0) {
    throw std::invalid_argument("observation interval must split into whole-step subintervals");
  }
  const std::size_t sub_steps = steps / m;

  VariationalSummary summary;
  summary.ran = true;
  PseudoObservationPath path;
  // Subinterval index at which `path` starts.
  std::size_t path_origin = 0;

  auto solve = [&](std::size_t j, const std::vector<Eigen::VectorXd>& states, const Eigen::VectorXd& weights) {
    const ParticleEnsemble current{states, weights, t_k + static_cast<double>(j * sub_steps) * dt};
    const EnsembleMoments moments = empirical_moments(current);
    const double t_start = current.time;
    const VariationalProblem problem =
        make_variational_problem(moments, observation, obs_model, model, t_start, t_next, dt, variational);
    const OptimizationResult opt = minimize_cost(problem, moments.mean, variational);
    path = build_pseudo_path(
        opt.x, model, obs_model, t_start, t_next, static_cast<int>(m - j), dt);
    path_origin = j;
    ++summary.solves;
    summary.status = to_string(opt.status);
    summary.iterations += opt.iterations;
    if (j == 0) {
      summary.initial_cost = opt.initial_cost;
    }
    summary.final_cost = opt.cost;
    summary.terminal_residual = (path.pseudo_observations.back() - observation).norm();
  };

  // Reweighting against the final pseudo-observation needs the solve before the cycle starts.
  Eigen::VectorXd reweight_target = observation;
  double presolve_seconds = 0.0;
  const bool presolved = variational.reweight_against_pseudo;
  if (presolved) {
    const auto start = std::chrono::steady_clock::now();
    solve(0, ensemble.states, ensemble.weights);
    reweight_target = path.pseudo_observations.back();
    presolve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }

  TargetProvider targets = [&](std::size_t j, const std::vector<Eigen::VectorXd>& states,
                               const Eigen::VectorXd& weights) {
    if ((j == 0 && !presolved) || (j > 0 && variational.resolve_per_subinterval)) {
      solve(j, states, weights);
    }
    return SubintervalTarget{(j + 1) * sub_steps, path.pseudo_observations[j + 1 - path_origin]};
  };

  CycleResult result = nudged_cycle(
      ensemble, model, obs_model, reweight_target, t_k, t_next, nudging, streams, policy, targets);
  result.diagnostics.variational = summary;
  result.diagnostics.variational_seconds += presolve_seconds;
  return result;
}

}  // namespace nudgepf

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

#include "nudgepf/bootstrap_pf.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "cycle_common.hpp"
#include "nudgepf/rng.hpp"

namespace nudgepf {

CycleStreams make_cycle_streams(
    std::uint64_t run_seed,
    std::uint64_t filter_tag,
    std::size_t cycle,
    std::size_t particles,
    Eigen::Index dimension,
    double dt,
    std::size_t steps) {
  CycleStreams streams;
  streams.paths.reserve(particles);
  for (std::size_t i = 0; i < particles; ++i) {
    streams.paths.push_back(generate_brownian_path(
        dimension, dt, steps, derive_seed({run_seed, filter_tag, tag(StreamTag::kPropagation), cycle, i})));
  }
  streams.realization_seed = derive_seed({run_seed, filter_tag, tag(StreamTag::kRealization), cycle});
  Engine engine{derive_seed({run_seed, filter_tag, tag(StreamTag::kResampling), cycle})};
  streams.resample_uniform = uniform01(engine);
  return streams;
}

namespace detail {

std::size_t check_cycle_inputs(
    const ParticleEnsemble& ensemble, double t_k, double t_next, const CycleStreams& streams) {
  validate(ensemble);
  if (streams.paths.size() != ensemble.size()) {
    throw std::invalid_argument("one Brownian path per particle required");
  }
  const std::size_t steps = step_count(t_k, t_next, streams.paths.front().dt);
  for (const auto& path : streams.paths) {
    if (path.increments.size() < steps || path.dt != streams.paths.front().dt) {
      throw std::invalid_argument("Brownian paths do not cover the observation interval");
    }
  }
  return steps;
}

void init_diagnostics(CycleDiagnostics& diag, const ParticleEnsemble& ensemble, std::size_t steps) {
  const auto n = static_cast<Eigen::Index>(ensemble.size());
  diag.trajectories.assign(steps + 1, {});
  diag.trajectories[0] = ensemble.states;
  for (std::size_t s = 1; s <= steps; ++s) {
    diag.trajectories[s].resize(ensemble.size());
  }
  diag.control_norm = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(steps), n);
  diag.nudge_ratio = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(steps), n, kMissing);
  diag.proposed_ratio = diag.nudge_ratio;
  diag.log_rn = Eigen::VectorXd::Zero(n);
}

ParticleEnsemble finish_cycle(
    const ParticleEnsemble& start,
    const Eigen::VectorXd& log_extra,
    const Eigen::VectorXd& observation,
    const ObservationModel& obs_model,
    double t_next,
    const CycleStreams& streams,
    const ResamplingPolicy& policy,
    CycleDiagnostics& diag) {
  const std::size_t steps = diag.trajectories.size() - 1;
  if (diag.failed_particles == start.size()) {
    throw IntegrationError("every particle diverged");
  }

  ParticleEnsemble advected{diag.trajectories[steps], start.weights, t_next};

  // Prior weights at t_next: previous posterior times the path-measure factors.
  Eigen::VectorXd log_prior(start.weights.size());
  for (Eigen::Index i = 0; i < log_prior.size(); ++i) {
    log_prior[i] = std::log(start.weights[i]) + log_extra[i];
  }
  diag.prior = advected;
  if (log_extra.isZero(0.0)) {
    diag.prior.weights = start.weights;
  } else if (!normalize_log_weights(log_prior, diag.prior.weights)) {
    diag.prior.weights = start.weights;
  }
  diag.prior_ness = normalized_effective_sample_size(diag.prior.weights);

  for (std::size_t s = 1; s < steps; ++s) {
    diag.step_means.push_back(weighted_mean(diag.trajectories[s], start.weights));
  }

  auto reweighted = bayes_reweight(advected, observation, obs_model, log_extra);
  diag.collapsed = reweighted.collapsed;
  diag.posterior = reweighted.ensemble;
  diag.posterior_ness = normalized_effective_sample_size(diag.posterior.weights);
  diag.step_means.push_back(weighted_mean(diag.posterior.states, diag.posterior.weights));

  if (policy.enabled && needs_resampling(diag.posterior.weights, policy.threshold)) {
    diag.resampled = true;
    return systematic_resample(diag.posterior, streams.resample_uniform).ensemble;
  }
  return diag.posterior;
}

}  // namespace detail

CycleResult pf_assimilation_cycle(
    const ParticleEnsemble& ensemble,
    const SdeModel& model,
    const ObservationModel& obs_model,
    const Eigen::VectorXd& observation,
    double t_k,
    double t_next,
    const CycleStreams& streams,
    const ResamplingPolicy& policy) {
  const std::size_t steps = detail::check_cycle_inputs(ensemble, t_k, t_next, streams);
  const double dt = streams.paths.front().dt;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(model.dimension());

  CycleResult result;
  auto& diag = result.diagnostics;
  detail::init_diagnostics(diag, ensemble, steps);
  Eigen::VectorXd log_extra = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ensemble.size()));

  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    bool failed = false;
    for (std::size_t s = 0; s < steps; ++s) {
      const auto& x = diag.trajectories[s][i];
      if (failed) {
        diag.trajectories[s + 1][i] = x;
        continue;
      }
      try {
        diag.trajectories[s + 1][i] = integrate_step(model, x, zero, dt, streams.paths[i].increments[s]);
      } catch (const IntegrationError&) {
        failed = true;
        diag.trajectories[s + 1][i] = x;
      }
    }
    if (failed) {
      ++diag.failed_particles;
      log_extra[static_cast<Eigen::Index>(i)] = -std::numeric_limits<double>::infinity();
    }
  }

  result.ensemble = detail::finish_cycle(ensemble, log_extra, observation, obs_model, t_next, streams, policy, diag);
  return result;
}

}  // namespace nudgepf

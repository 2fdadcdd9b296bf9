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

#include "nudgepf/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "nudgepf/bootstrap_pf.hpp"
#include "nudgepf/nudging.hpp"
#include "nudgepf/rng.hpp"
#include "nudgepf/var_npf.hpp"

namespace nudgepf {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Symmetric square root of a positive semidefinite matrix.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (m + m.transpose()));
  const Eigen::VectorXd roots = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return solver.eigenvectors() * roots.asDiagonal() * solver.eigenvectors().transpose();
}

// Mean and max over the non-missing entries.
void ratio_stats(const Eigen::MatrixXd& ratios, double& mean, double& max) {
  std::size_t count = 0;
  for (Eigen::Index r = 0; r < ratios.rows(); ++r) {
    for (Eigen::Index c = 0; c < ratios.cols(); ++c) {
      const double v = ratios(r, c);
      if (!std::isnan(v)) {
        mean += v;
        max = std::max(max, v);
        ++count;
      }
    }
  }
  if (count > 0) {
    mean /= static_cast<double>(count);
  }
}

}  // namespace

TruthData generate_truth_and_observations(const ExperimentConfig& config, std::uint64_t seed) {
  validate(config);
  const auto start = Clock::now();
  const SdeModel model = build_model(config);
  const std::size_t total = config.total_steps();
  const std::size_t per_obs = config.steps_per_observation();

  TruthData truth;
  const BrownianPath path =
      generate_brownian_path(model.dimension(), config.dt, total, derive_seed({seed, tag(StreamTag::kTruth)}));
  truth.states = integrate_path(model, config.truth_initial, {}, path, 0.0, static_cast<double>(total) * config.dt);
  truth.times.reserve(total + 1);
  for (std::size_t k = 0; k <= total; ++k) {
    truth.times.push_back(static_cast<double>(k) * config.dt);
  }

  Engine engine{derive_seed({seed, tag(StreamTag::kObservationNoise)})};
  const Eigen::MatrixXd noise_root = psd_sqrt(config.obs_noise_covariance);
  for (std::size_t k = 1; k <= config.observation_count(); ++k) {
    const Eigen::VectorXd xi = noise_root * standard_normal(engine, config.obs_operator.rows());
    truth.obs_times.push_back(static_cast<double>(k) * config.obs_interval);
    truth.observations.push_back(config.obs_operator * truth.states[k * per_obs] + xi);
  }
  truth.seconds = seconds_since(start);
  return truth;
}

ParticleEnsemble sample_initial_ensemble(const ExperimentConfig& config, std::uint64_t seed) {
  Engine engine{derive_seed({seed, tag(StreamTag::kInitialEnsemble)})};
  const double scale = std::sqrt(config.ensemble_variance);
  std::vector<Eigen::VectorXd> states;
  for (int i = 0; i < config.particles; ++i) {
    states.push_back(config.ensemble_mean + scale * standard_normal(engine, config.ensemble_mean.size()));
  }
  return ParticleEnsemble::uniform(std::move(states), 0.0);
}

std::uint64_t observation_hash(const TruthData& truth) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](double value) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &value, sizeof(double));
    for (const unsigned char b : bytes) {
      h = (h ^ b) * 0x100000001b3ULL;
    }
  };
  for (std::size_t k = 0; k < truth.observations.size(); ++k) {
    feed(truth.obs_times[k]);
    for (const double v : truth.observations[k]) {
      feed(v);
    }
  }
  return h;
}

double compute_rmse(const ExperimentRecord& record) {
  const std::size_t count = std::min(record.mean_path.size(), record.truth.size());
  if (count == 0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  double sum = 0.0;
  Eigen::Index components = 0;
  for (std::size_t k = 0; k < count; ++k) {
    sum += (record.mean_path[k] - record.truth[k]).squaredNorm();
    components += record.truth[k].size();
  }
  return std::sqrt(sum / static_cast<double>(components));
}

RecordMetrics compute_metrics(const ExperimentRecord& record) {
  RecordMetrics m;
  m.rmse = compute_rmse(record);
  for (const auto& c : record.cycles) {
    m.avg_ness += c.posterior_ness;
    m.avg_prior_ness += c.prior_ness;
    m.realization_steps += c.realization_steps;
    m.max_batches_used = std::max(m.max_batches_used, c.max_batches_used);
    m.unconverged += c.unconverged;
    m.resample_count += c.resampled ? 1 : 0;
    m.collapse_count += c.collapsed ? 1 : 0;
  }
  if (!record.cycles.empty()) {
    m.avg_ness /= static_cast<double>(record.cycles.size());
    m.avg_prior_ness /= static_cast<double>(record.cycles.size());
  }
  std::size_t rollbacks = 0;
  for (const auto& [cycle, c] : record.controls) {
    m.mean_control += c.control_norm;
    m.max_control = std::max(m.max_control, c.control_norm);
    rollbacks += c.rolled_back ? 1 : 0;
  }
  if (!record.controls.empty()) {
    m.mean_control /= static_cast<double>(record.controls.size());
    m.rollback_fraction = static_cast<double>(rollbacks) / static_cast<double>(record.controls.size());
  }
  ratio_stats(record.proposed_ratio, m.mean_ratio, m.max_ratio);
  ratio_stats(record.nudge_ratio, m.mean_applied_ratio, m.max_applied_ratio);
  m.runtime_seconds = record.timings.filter_seconds;
  return m;
}

ExperimentRecord run_filter(
    const ExperimentConfig& config,
    FilterKind kind,
    const TruthData& truth,
    const ParticleEnsemble& initial,
    std::uint64_t run_seed) {
  validate(config);
  const auto start = Clock::now();
  const SdeModel model = build_model(config);
  const ObservationModel obs_model = build_observation_model(config);
  const std::size_t per_obs = config.steps_per_observation();
  const std::size_t total = config.total_steps();
  const auto n = static_cast<Eigen::Index>(initial.size());

  ExperimentRecord record;
  record.filter = kind;
  record.seed = run_seed;
  record.particles = initial.size();
  record.times = truth.times;
  record.truth = truth.states;
  record.obs_times = truth.obs_times;
  record.observations = truth.observations;
  record.mean_path.push_back(weighted_mean(initial.states, initial.weights));
  record.particle_states.push_back(initial.states);
  record.control_norm = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(total + 1), n);
  record.nudge_ratio =
      Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(total + 1), n, std::numeric_limits<double>::quiet_NaN());
  record.proposed_ratio = record.nudge_ratio;

  ParticleEnsemble ensemble = initial;
  for (std::size_t k = 0; k < truth.observations.size(); ++k) {
    const double t_k = static_cast<double>(k) * config.obs_interval;
    const double t_next = static_cast<double>(k + 1) * config.obs_interval;
    const CycleStreams streams = make_cycle_streams(
        run_seed, filter_tag(kind), k, initial.size(), model.dimension(), config.dt, per_obs);
    const Eigen::VectorXd& y = truth.observations[k];
    CycleResult result;
    try {
      switch (kind) {
        case FilterKind::kPf:
          result = pf_assimilation_cycle(ensemble, model, obs_model, y, t_k, t_next, streams, config.resampling);
          break;
        case FilterKind::kNpf:
          result = npf_assimilation_cycle(
              ensemble, model, obs_model, y, t_k, t_next, config.nudging, streams, config.resampling);
          break;
        case FilterKind::kVarNpf:
          result = var_npf_assimilation_cycle(
              ensemble, model, obs_model, y, t_k, t_next, config.nudging, config.variational, streams,
              config.resampling);
          break;
      }
    } catch (const std::exception& e) {
      record.failed = true;
      record.failure = "cycle " + std::to_string(k) + ": " + e.what();
      break;
    }
    auto& diag = result.diagnostics;
    for (std::size_t s = 1; s <= per_obs; ++s) {
      const auto row = static_cast<Eigen::Index>(k * per_obs + s);
      record.mean_path.push_back(diag.step_means[s - 1]);
      record.particle_states.push_back(std::move(diag.trajectories[s]));
      record.control_norm.row(row) = diag.control_norm.row(static_cast<Eigen::Index>(s - 1));
      record.nudge_ratio.row(row) = diag.nudge_ratio.row(static_cast<Eigen::Index>(s - 1));
      record.proposed_ratio.row(row) = diag.proposed_ratio.row(static_cast<Eigen::Index>(s - 1));
    }
    CycleRecord cycle;
    cycle.time = t_next;
    cycle.prior = diag.prior;
    cycle.posterior = diag.posterior;
    cycle.prior_ness = diag.prior_ness;
    cycle.posterior_ness = diag.posterior_ness;
    cycle.resampled = diag.resampled;
    cycle.collapsed = diag.collapsed;
    cycle.failed_particles = diag.failed_particles;
    cycle.rollbacks = diag.rollbacks;
    cycle.controls = diag.controls.size();
    cycle.realization_steps = diag.realization_steps;
    cycle.max_batches_used = diag.max_batches_used;
    cycle.unconverged = diag.unconverged;
    cycle.variational = diag.variational;
    record.cycles.push_back(std::move(cycle));
    for (const auto& c : diag.controls) {
      record.controls.emplace_back(k, c);
    }
    record.timings.variational_seconds += diag.variational_seconds;
    record.timings.nudging_seconds += diag.nudging_seconds;
    ensemble = std::move(result.ensemble);
  }
  record.timings.truth_seconds = truth.seconds;
  record.timings.filter_seconds = seconds_since(start);
  record.timings.other_seconds = std::max(
      0.0, record.timings.filter_seconds - record.timings.variational_seconds - record.timings.nudging_seconds);
  return record;
}

ExperimentRecord run_experiment(const ExperimentConfig& config) {
  const TruthData truth = generate_truth_and_observations(config, config.seed);
  const ParticleEnsemble initial = sample_initial_ensemble(config, config.seed);
  return run_filter(config, config.filter, truth, initial, config.seed);
}

}  // namespace nudgepf

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

#include "nudgepf/nudging.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "cycle_common.hpp"
#include "nudgepf/rng.hpp"

namespace nudgepf {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Smallest drift norm used to normalize the control variation.
constexpr double kMinDriftNorm = 1e-12;

}  // namespace

void validate(const NudgingConfig& config) {
  if (config.subintervals < 1 || config.batch_size < 1 || config.max_batches < 1 || !(config.tolerance > 0.0) ||
      std::isnan(config.rollback_log_threshold)) {
    throw std::invalid_argument("invalid nudging configuration");
  }
}

FeynmanKacSampler::FeynmanKacSampler(
    const SdeModel& model,
    const ObservationModel& obs_model,
    Eigen::VectorXd start,
    std::size_t horizon_steps,
    double dt,
    Eigen::VectorXd target,
    std::uint64_t seed)
    : model_(model),
      obs_model_(obs_model),
      start_(std::move(start)),
      horizon_steps_(horizon_steps),
      dt_(dt),
      target_(std::move(target)),
      seed_(seed),
      start_drift_norm_(model.drift(start_).norm()) {
  if (horizon_steps_ == 0) {
    throw std::invalid_argument("Feynman-Kac horizon must span at least one step");
  }
}

void FeynmanKacSampler::add_realizations(std::size_t count) {
  const Eigen::Index d = model_.dimension();
  const double h = dt_;
  const double sqrt_dt = std::sqrt(dt_);
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(d, d);
  for (std::size_t c = 0; c < count; ++c) {
    Engine engine{derive_seed({seed_, realizations_.size()})};
    Eigen::VectorXd eta = start_;
    Eigen::MatrixXd psi = identity;
    bool finite = true;
    for (std::size_t s = 0; s < horizon_steps_; ++s) {
      // RK4 on the state and its fundamental matrix, Psi' = (grad f)(eta) Psi.
      const Eigen::VectorXd k1 = model_.drift(eta);
      const Eigen::MatrixXd p1 = model_.drift_jacobian(eta) * psi;
      const Eigen::VectorXd e2 = eta + 0.5 * h * k1;
      const Eigen::VectorXd k2 = model_.drift(e2);
      const Eigen::MatrixXd p2 = model_.drift_jacobian(e2) * (psi + 0.5 * h * p1);
      const Eigen::VectorXd e3 = eta + 0.5 * h * k2;
      const Eigen::VectorXd k3 = model_.drift(e3);
      const Eigen::MatrixXd p3 = model_.drift_jacobian(e3) * (psi + 0.5 * h * p2);
      const Eigen::VectorXd e4 = eta + h * k3;
      const Eigen::VectorXd k4 = model_.drift(e4);
      const Eigen::MatrixXd p4 = model_.drift_jacobian(e4) * (psi + h * p3);
      eta += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4) +
             model_.dispersion() * (sqrt_dt * standard_normal(engine, d));
      psi += (h / 6.0) * (p1 + 2.0 * p2 + 2.0 * p3 + p4);
      if (!eta.allFinite() || !psi.allFinite()) {
        finite = false;
        break;
      }
    }
    if (finite) {
      realizations_.push_back(
          {-obs_model_.cost(eta, target_), psi.transpose() * obs_model_.cost_gradient(eta, target_), eta});
    } else {
      // A blown-up realization contributes nothing to either expectation.
      realizations_.push_back(
          {-std::numeric_limits<double>::infinity(), Eigen::VectorXd::Zero(d), Eigen::VectorXd::Constant(d, std::numeric_limits<double>::quiet_NaN())});
    }
  }
}

double FeynmanKacSampler::log_phi() const {
  double max_log = -std::numeric_limits<double>::infinity();
  for (const auto& r : realizations_) {
    max_log = std::max(max_log, r.log_weight);
  }
  if (!std::isfinite(max_log)) {
    return -std::numeric_limits<double>::infinity();
  }
  double sum = 0.0;
  for (const auto& r : realizations_) {
    sum += std::exp(r.log_weight - max_log);
  }
  return max_log + std::log(sum / static_cast<double>(realizations_.size()));
}

Eigen::VectorXd FeynmanKacSampler::grad_log_phi() const {
  const Eigen::Index d = model_.dimension();
  double max_log = -std::numeric_limits<double>::infinity();
  for (const auto& r : realizations_) {
    max_log = std::max(max_log, r.log_weight);
  }
  Eigen::VectorXd numerator = Eigen::VectorXd::Zero(d);
  if (!std::isfinite(max_log)) {
    return numerator;
  }
  double denominator = 0.0;
  for (const auto& r : realizations_) {
    const double w = std::exp(r.log_weight - max_log);
    numerator -= w * r.cost_sensitivity;
    denominator += w;
  }
  return numerator / denominator;
}

PhiEstimate estimate_phi_grad(
    const SdeModel& model,
    const ObservationModel& obs_model,
    double t,
    const Eigen::VectorXd& x,
    double horizon_end,
    const Eigen::VectorXd& target,
    std::size_t realizations,
    double dt,
    std::uint64_t seed) {
  if (!(horizon_end > t) || realizations == 0) {
    throw std::invalid_argument("estimate_phi_grad needs a positive horizon and at least one realization");
  }
  FeynmanKacSampler sampler(model, obs_model, x, step_count(t, horizon_end, dt), dt, target, seed);
  sampler.add_realizations(realizations);

  PhiEstimate est;
  est.log_phi = sampler.log_phi();
  est.grad_log_phi = sampler.grad_log_phi();
  const double phi = std::exp(est.log_phi);
  est.underflow = !(phi >= kPhiFloor);
  est.phi = est.underflow ? kPhiFloor : phi;
  est.grad_phi = phi * est.grad_log_phi;
  est.realization_steps = sampler.realization_steps();
  return est;
}

Eigen::VectorXd feedback_control(double phi, const Eigen::VectorXd& grad_phi, const Eigen::MatrixXd& diffusion) {
  if (!(phi > 0.0)) {
    throw std::invalid_argument("feedback control needs phi > 0");
  }
  return diffusion * grad_phi / phi;
}

ControlEstimate adaptive_control(
    const SdeModel& model,
    const ObservationModel& obs_model,
    double t,
    const Eigen::VectorXd& x,
    double horizon_end,
    const Eigen::VectorXd& target,
    double dt,
    const NudgingConfig& config,
    std::uint64_t seed) {
  validate(config);
  if (!(horizon_end > t)) {
    throw std::invalid_argument("adaptive_control needs horizon_end > t");
  }
  const std::size_t horizon = step_count(t, horizon_end, dt);
  FeynmanKacSampler sampler(model, obs_model, x, horizon, dt, target, seed);
  const auto batch = static_cast<std::size_t>(config.batch_size);
  const double scale = std::max(sampler.start_drift_norm(), kMinDriftNorm);

  ControlEstimate est;
  est.horizon_steps = horizon;
  auto update = [&] {
    sampler.add_realizations(batch);
    ++est.batches;
    const double log_phi = sampler.log_phi();
    const double phi = std::exp(log_phi);
    est.grad_log_phi = sampler.grad_log_phi();
    est.underflow = !(phi >= kPhiFloor);
    est.phi = est.underflow ? kPhiFloor : phi;
    est.grad_phi = phi * est.grad_log_phi;
    return est.underflow ? Eigen::VectorXd::Zero(x.size()).eval() : (model.diffusion() * est.grad_log_phi).eval();
  };

  est.control = update();
  while (est.batches < config.max_batches) {
    Eigen::VectorXd next = update();
    const double variation = (next - est.control).norm() / scale;
    est.normalized_variation_history.push_back(variation);
    est.control = std::move(next);
    if (variation <= config.tolerance) {
      est.converged = true;
      break;
    }
  }
  est.realizations_used = sampler.size();
  est.realization_steps = sampler.realization_steps();
  return est;
}

double rn_log_increment(std::span<const Eigen::VectorXd> v_values, std::span<const Eigen::VectorXd> dw, double dt) {
  if (v_values.size() != dw.size()) {
    throw std::invalid_argument("one control value per Brownian increment required");
  }
  double total = 0.0;
  for (std::size_t s = 0; s < dw.size(); ++s) {
    total += -v_values[s].dot(dw[s]) - 0.5 * v_values[s].squaredNorm() * dt;
  }
  return total;
}

double compute_nudging_bm_ratio(
    const Eigen::VectorXd& control, const Eigen::VectorXd& dw, double dt, const Eigen::MatrixXd& dispersion) {
  const double forcing = (dispersion * dw).norm();
  if (forcing == 0.0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return (control * dt).norm() / forcing;
}

CycleResult nudged_cycle(
    const ParticleEnsemble& ensemble,
    const SdeModel& model,
    const ObservationModel& obs_model,
    const Eigen::VectorXd& reweight_observation,
    double t_k,
    double t_next,
    const NudgingConfig& config,
    const CycleStreams& streams,
    const ResamplingPolicy& policy,
    const TargetProvider& targets) {
  validate(config);
  const auto cycle_start = Clock::now();
  const std::size_t steps = detail::check_cycle_inputs(ensemble, t_k, t_next, streams);
  const auto m = static_cast<std::size_t>(config.subintervals);
  if (steps % m != 0) {
    throw std::invalid_argument("observation interval must split into whole-step subintervals");
  }
  const std::size_t sub_steps = steps / m;
  const double dt = streams.paths.front().dt;
  const double sub_duration = static_cast<double>(sub_steps) * dt;
  const std::size_t n = ensemble.size();
  const Eigen::MatrixXd& sigma = model.dispersion();

  CycleResult result;
  auto& diag = result.diagnostics;
  detail::init_diagnostics(diag, ensemble, steps);
  std::vector<bool> failed(n, false);
  double target_seconds = 0.0;

  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t first = j * sub_steps;
    const auto target_start = Clock::now();
    const SubintervalTarget goal = targets(j, diag.trajectories[first], ensemble.weights);
    target_seconds += seconds_since(target_start);
    if (goal.horizon_step <= first || goal.horizon_step > steps) {
      throw std::invalid_argument("control horizon must end after the subinterval start and by t_next");
    }
    const double t_j = t_k + static_cast<double>(first) * dt;
    const double horizon_end = t_k + static_cast<double>(goal.horizon_step) * dt;

    for (std::size_t i = 0; i < n; ++i) {
      Eigen::VectorXd x = diag.trajectories[first][i];
      if (failed[i]) {
        for (std::size_t s = 1; s <= sub_steps; ++s) {
          diag.trajectories[first + s][i] = x;
        }
        continue;
      }
      const ControlEstimate est = adaptive_control(
          model, obs_model, t_j, x, horizon_end, goal.target, dt, config,
          derive_seed({streams.realization_seed, i, j}));

      Eigen::VectorXd u = est.control;
      Eigen::VectorXd v = est.underflow ? Eigen::VectorXd::Zero(x.size()).eval()
                                        : (sigma.transpose() * est.grad_log_phi).eval();
      ControlRecord rec;
      rec.particle = i;
      rec.subinterval = j;
      rec.control_norm = u.norm();
      rec.expected_log_rn = expected_log_rn_increment(v, sub_duration);
      rec.underflow = est.underflow;
      rec.converged = est.converged;
      rec.batches = est.batches;
      rec.realizations = est.realizations_used;
      rec.horizon_steps = est.horizon_steps;
      rec.rolled_back = est.underflow || rollback_test(rec.expected_log_rn, config);
      if (rec.rolled_back) {
        u.setZero();
        v.setZero();
        ++diag.rollbacks;
      }
      diag.realization_steps += est.realization_steps;
      diag.max_batches_used = std::max(diag.max_batches_used, est.batches);
      if (!est.converged) {
        ++diag.unconverged;
      }
      diag.controls.push_back(rec);

      const auto idx = static_cast<Eigen::Index>(i);
      for (std::size_t s = 0; s < sub_steps; ++s) {
        const std::size_t step = first + s;
        const Eigen::VectorXd& dw = streams.paths[i].increments[step];
        if (!failed[i]) {
          const auto row = static_cast<Eigen::Index>(step);
          diag.proposed_ratio(row, idx) = compute_nudging_bm_ratio(est.control, dw, dt, sigma);
          if (!rec.rolled_back) {
            diag.nudge_ratio(row, idx) = compute_nudging_bm_ratio(u, dw, dt, sigma);
            diag.control_norm(row, idx) = u.norm();
            diag.log_rn[idx] += -v.dot(dw) - 0.5 * v.squaredNorm() * dt;
          }
          try {
            x = integrate_step(model, x, u, dt, dw);
          } catch (const IntegrationError&) {
            failed[i] = true;
          }
        }
        diag.trajectories[step + 1][i] = x;
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (failed[i]) {
      ++diag.failed_particles;
      diag.log_rn[static_cast<Eigen::Index>(i)] = -std::numeric_limits<double>::infinity();
    }
  }

  result.ensemble =
      detail::finish_cycle(ensemble, diag.log_rn, reweight_observation, obs_model, t_next, streams, policy, diag);
  diag.variational_seconds = target_seconds;
  diag.nudging_seconds = seconds_since(cycle_start) - target_seconds;
  return result;
}

CycleResult npf_assimilation_cycle(
    const ParticleEnsemble& ensemble,
    const SdeModel& model,
    const ObservationModel& obs_model,
    const Eigen::VectorXd& observation,
    double t_k,
    double t_next,
    const NudgingConfig& config,
    const CycleStreams& streams,
    const ResamplingPolicy& policy) {
  const std::size_t steps = step_count(t_k, t_next, streams.paths.at(0).dt);
  TargetProvider full_horizon = [&](std::size_t, const std::vector<Eigen::VectorXd>&, const Eigen::VectorXd&) {
    return SubintervalTarget{steps, observation};
  };
  return nudged_cycle(
      ensemble, model, obs_model, observation, t_k, t_next, config, streams, policy, full_horizon);
}

}  // namespace nudgepf

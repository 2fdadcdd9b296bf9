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

#ifndef NUDGEPF_NUDGING_HPP
#define NUDGEPF_NUDGING_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "nudgepf/cycle.hpp"
#include "nudgepf/ensemble.hpp"
#include "nudgepf/sde.hpp"

/**
 * \file
 * \brief Nudged particle filter: per-particle optimal control estimated from
 * Feynman-Kac expectations over uncontrolled realizations, with Girsanov
 * corrections to the importance weights.
 */

namespace nudgepf {

struct NudgingConfig {
  /// Control subintervals per observation interval.
  int subintervals = 5;
  /// Realizations per batch.
  int batch_size = 2;
  /// Tolerance on the normalized control variation.
  double tolerance = 0.1;
  int max_batches = 50;
  /// A computed control is discarded when -1/2 |v|^2 dt_sub falls below this.
  /// +inf forces zero control everywhere; -inf disables rollback.
  double rollback_log_threshold = -2.0;
};

/// Throws std::invalid_argument on out-of-range fields.
void validate(const NudgingConfig& config);

/// Monte Carlo estimate of Phi(t, x) = E[exp(-c(eta_T, y))] and its gradient,
/// where c is the negative log-likelihood and eta are uncontrolled realizations
/// started from x.
///
/// Realizations are accumulated incrementally; realization r draws its
/// Brownian increments from derive_seed({seed, r}), so the estimate after n
/// realizations does not depend on how they were batched.
class FeynmanKacSampler {
 public:
  struct Realization {
    /// -c(eta_T, y).
    double log_weight;
    /// Psi^T grad c(eta_T, y), Psi the fundamental matrix of the linearized flow.
    Eigen::VectorXd cost_sensitivity;
    Eigen::VectorXd endpoint;
  };

  FeynmanKacSampler(
      const SdeModel& model,
      const ObservationModel& obs_model,
      Eigen::VectorXd start,
      std::size_t horizon_steps,
      double dt,
      Eigen::VectorXd target,
      std::uint64_t seed);

  void add_realizations(std::size_t count);

  [[nodiscard]] std::size_t size() const { return realizations_.size(); }
  [[nodiscard]] const std::vector<Realization>& realizations() const { return realizations_; }
  [[nodiscard]] std::size_t horizon_steps() const { return horizon_steps_; }
  [[nodiscard]] std::size_t realization_steps() const { return realizations_.size() * horizon_steps_; }

  /// log of the sample mean of exp(-c).
  [[nodiscard]] double log_phi() const;
  /// grad Phi / Phi, evaluated as a self-normalized average.
  [[nodiscard]] Eigen::VectorXd grad_log_phi() const;
  /// Mean of |f(eta_t)| over the realizations at the start time.
  [[nodiscard]] double start_drift_norm() const { return start_drift_norm_; }

 private:
  const SdeModel& model_;
  const ObservationModel& obs_model_;
  Eigen::VectorXd start_;
  std::size_t horizon_steps_;
  double dt_;
  Eigen::VectorXd target_;
  std::uint64_t seed_;
  double start_drift_norm_;
  std::vector<Realization> realizations_;
};

/// Value below which Phi is reported at the floor and flagged.
inline constexpr double kPhiFloor = 1e-300;

struct PhiEstimate {
  double phi = 1.0;
  double log_phi = 0.0;
  Eigen::VectorXd grad_phi;
  Eigen::VectorXd grad_log_phi;
  bool underflow = false;
  std::size_t realization_steps = 0;
};

PhiEstimate estimate_phi_grad(
    const SdeModel& model,
    const ObservationModel& obs_model,
    double t,
    const Eigen::VectorXd& x,
    double horizon_end,
    const Eigen::VectorXd& target,
    std::size_t realizations,
    double dt,
    std::uint64_t seed);

/// u = R grad_phi / phi.
Eigen::VectorXd feedback_control(double phi, const Eigen::VectorXd& grad_phi, const Eigen::MatrixXd& diffusion);

struct ControlEstimate {
  double phi = 1.0;
  Eigen::VectorXd grad_phi;
  /// grad_phi / phi, computed without forming phi.
  Eigen::VectorXd grad_log_phi;
  Eigen::VectorXd control;
  std::size_t realizations_used = 0;
  int batches = 0;
  bool converged = false;
  bool underflow = false;
  std::vector<double> normalized_variation_history;
  std::size_t realization_steps = 0;
  std::size_t horizon_steps = 0;
};

/// Adds batches of `batch_size` realizations until the normalized control
/// variation drops to `tolerance` or `max_batches` is reached.
ControlEstimate adaptive_control(
    const SdeModel& model,
    const ObservationModel& obs_model,
    double t,
    const Eigen::VectorXd& x,
    double horizon_end,
    const Eigen::VectorXd& target,
    double dt,
    const NudgingConfig& config,
    std::uint64_t seed);

/// Left-point log Radon-Nikodym increment -sum <v, dW> - 1/2 sum |v|^2 dt.
double rn_log_increment(std::span<const Eigen::VectorXd> v_values, std::span<const Eigen::VectorXd> dw, double dt);

/// Deterministic part of the log-RN increment of a constant v held for `duration`.
inline double expected_log_rn_increment(const Eigen::VectorXd& v, double duration) {
  return -0.5 * v.squaredNorm() * duration;
}

/// True when the control should be replaced by zero.
inline bool rollback_test(double expected_log_rn, const NudgingConfig& config) {
  return expected_log_rn < config.rollback_log_threshold;
}

/// |u dt| / |sigma dW|; NaN when the Brownian forcing vanishes.
double compute_nudging_bm_ratio(
    const Eigen::VectorXd& control, const Eigen::VectorXd& dw, double dt, const Eigen::MatrixXd& dispersion);

/// Horizon and target for the control solves of one subinterval.
struct SubintervalTarget {
  /// Horizon end, in integrator steps from t_k.
  std::size_t horizon_step = 0;
  Eigen::VectorXd target;
};

/// Called once per subinterval, before any particle is advanced through it,
/// with the particle states at the subinterval start and the prior weights.
using TargetProvider = std::function<SubintervalTarget(
    std::size_t subinterval, const std::vector<Eigen::VectorXd>& states, const Eigen::VectorXd& weights)>;

/// Nudged cycle with caller-supplied control targets. The terminal Bayes
/// update is taken against `reweight_observation`.
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
    const TargetProvider& targets);

/// Nudged particle filter cycle: every subinterval solves the control problem
/// over the remaining horizon to t_next against the true observation.
CycleResult npf_assimilation_cycle(
    const ParticleEnsemble& ensemble,
    const SdeModel& model,
    const ObservationModel& obs_model,
    const Eigen::VectorXd& observation,
    double t_k,
    double t_next,
    const NudgingConfig& config,
    const CycleStreams& streams,
    const ResamplingPolicy& policy = {});

}  // namespace nudgepf

#endif  // NUDGEPF_NUDGING_HPP

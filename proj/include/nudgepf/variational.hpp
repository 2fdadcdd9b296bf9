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

#ifndef NUDGEPF_VARIATIONAL_HPP
#define NUDGEPF_VARIATIONAL_HPP

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nudgepf/ensemble.hpp"
#include "nudgepf/sde.hpp"

namespace nudgepf {

struct VariationalConfig {
  /// Added to the prior covariance when it is ill-conditioned.
  double regularization = 1e-6;
  /// Box half-width in prior standard deviations.
  double bound_sigmas = 10.0;
  int memory = 10;
  int max_iterations = 200;
  double gradient_tolerance = 1e-5;
  double relative_tolerance = 1e-9;
  /// Re-solve from the current ensemble at every subinterval instead of once per interval.
  bool resolve_per_subinterval = false;
  /// Take the terminal Bayes update against the final pseudo-observation instead of the observation.
  bool reweight_against_pseudo = false;
};

/// Throws std::invalid_argument on out-of-range fields.
void validate(const VariationalConfig& config);

/// Strong-constraint single-observation cost
///   J(x) = 1/2 |x - mu|^2_{P^-1} + 1/2 |y - h(F(x))|^2_{S^-1}
/// with F the noise-free flow over the window.
struct VariationalProblem {
  Eigen::VectorXd prior_mean;
  /// Regularized prior covariance P.
  Eigen::MatrixXd prior_covariance;
  Eigen::MatrixXd prior_precision;
  Eigen::VectorXd observation;
  ObservationModel obs_model;
  SdeModel model;
  double dt = 0.0;
  std::size_t steps = 0;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

VariationalProblem make_variational_problem(
    const EnsembleMoments& prior,
    const Eigen::VectorXd& observation,
    const ObservationModel& obs_model,
    const SdeModel& model,
    double t_k,
    double t_next,
    double dt,
    const VariationalConfig& config);

/// Returned by variational_cost when the flow blows up.
inline constexpr double kBlowUpCost = 1e12;

double variational_cost(const Eigen::VectorXd& x, const VariationalProblem& problem);

/// Central finite differences with step max(1e-6, 1e-8 |x_i|).
Eigen::VectorXd variational_gradient(const Eigen::VectorXd& x, const VariationalProblem& problem);

/// cov + eps I when cov is ill-conditioned (condition > 1e8) or its smallest
/// eigenvalue is below eps; otherwise cov unchanged.
Eigen::MatrixXd regularize_covariance(const Eigen::MatrixXd& cov, double eps);

enum class OptimizerStatus {
  kGradientTolerance,
  kRelativeDecrease,
  kMaxIterations,
  kStalled,
};

std::string to_string(OptimizerStatus status);

struct OptimizerOptions {
  int memory = 10;
  int max_iterations = 200;
  double gradient_tolerance = 1e-5;
  double relative_tolerance = 1e-9;
};

struct OptimizationResult {
  Eigen::VectorXd x;
  double cost = 0.0;
  double initial_cost = 0.0;
  OptimizerStatus status = OptimizerStatus::kMaxIterations;
  int iterations = 0;
  int evaluations = 0;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;
using GradientFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Box-constrained limited-memory BFGS: two-loop direction restricted to the
/// free variables, projection onto [lower, upper], Armijo backtracking.
OptimizationResult minimize_box(
    const Objective& objective,
    const GradientFn& gradient,
    const Eigen::VectorXd& x_init,
    const Eigen::VectorXd& lower,
    const Eigen::VectorXd& upper,
    const OptimizerOptions& options = {});

OptimizationResult minimize_cost(
    const VariationalProblem& problem, const Eigen::VectorXd& x_init, const VariationalConfig& config = {});

/// Deterministic flow from the variational optimum sampled at the M + 1
/// subinterval endpoints of [t_k, t_next].
struct PseudoObservationPath {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> pseudo_observations;
};

PseudoObservationPath build_pseudo_path(
    const Eigen::VectorXd& x_opt,
    const SdeModel& model,
    const ObservationModel& obs_model,
    double t_k,
    double t_next,
    int subintervals,
    double dt);

}  // namespace nudgepf

#endif  // NUDGEPF_VARIATIONAL_HPP

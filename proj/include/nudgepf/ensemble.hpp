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

#ifndef NUDGEPF_ENSEMBLE_HPP
#define NUDGEPF_ENSEMBLE_HPP

#include <cstddef>
#include <vector>

#include <Eigen/Core>

/**
 * \file
 * \brief Weighted particle sets and the weight algebra shared by every filter.
 */

namespace nudgepf {

/// N weighted states approximating a distribution at `time`.
struct ParticleEnsemble {
  std::vector<Eigen::VectorXd> states;
  Eigen::VectorXd weights;
  double time = 0.0;

  [[nodiscard]] std::size_t size() const { return states.size(); }
  [[nodiscard]] Eigen::Index dimension() const { return states.empty() ? 0 : states.front().size(); }

  /// Equal weights 1/N.
  static ParticleEnsemble uniform(std::vector<Eigen::VectorXd> states, double time);
};

/// Throws std::invalid_argument if weights are negative, do not sum to one,
/// or any state is non-finite.
void validate(const ParticleEnsemble& ensemble);

struct EnsembleMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// Linear Gaussian measurement y = H x + xi, xi ~ N(0, noise_covariance).
class ObservationModel {
 public:
  ObservationModel(Eigen::MatrixXd op, Eigen::MatrixXd noise_covariance);

  /// H = I, noise covariance `variance` * I.
  static ObservationModel identity(Eigen::Index dimension, double variance);

  [[nodiscard]] Eigen::VectorXd observe(const Eigen::VectorXd& x) const { return op_ * x; }

  /// -1/2 <y - Hx, S^-1 (y - Hx)>, dropping the normalizing constant.
  [[nodiscard]] double log_likelihood(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;

  /// Negative log-likelihood, the terminal cost of the nudging control problem.
  [[nodiscard]] double cost(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const { return -log_likelihood(x, y); }

  /// Gradient of cost() with respect to x.
  [[nodiscard]] Eigen::VectorXd cost_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;

  [[nodiscard]] const Eigen::MatrixXd& op() const { return op_; }
  [[nodiscard]] const Eigen::MatrixXd& noise_covariance() const { return noise_covariance_; }
  [[nodiscard]] const Eigen::MatrixXd& noise_precision() const { return noise_precision_; }
  [[nodiscard]] Eigen::Index state_dimension() const { return op_.cols(); }
  [[nodiscard]] Eigen::Index observation_dimension() const { return op_.rows(); }

 private:
  Eigen::MatrixXd op_;
  Eigen::MatrixXd noise_covariance_;
  Eigen::MatrixXd noise_precision_;
};

/// 1 / sum(w_i^2) for normalized weights. Throws std::invalid_argument if the
/// weights are not normalized.
double effective_sample_size(const Eigen::VectorXd& weights);

/// effective_sample_size / N.
double normalized_effective_sample_size(const Eigen::VectorXd& weights);

/// Whether the resampling rule N_eff < threshold * N fires.
bool needs_resampling(const Eigen::VectorXd& weights, double threshold = 0.5);

struct ReweightResult {
  ParticleEnsemble ensemble;
  /// Every unnormalized weight was zero; weights were reset to uniform.
  bool collapsed = false;
};

/// Bayes update w_i <- w_i * exp(log_extra_i) * exp(g(X_i, y)), normalized.
///
/// Computed in log space with max-subtraction. An empty `log_extra_factors`
/// means all factors are one.
ReweightResult bayes_reweight(
    const ParticleEnsemble& ensemble,
    const Eigen::VectorXd& observation,
    const ObservationModel& obs_model,
    const Eigen::VectorXd& log_extra_factors = {});

/// Normalizes log-weights in place into `out`. Returns false if every entry is -inf or NaN.
bool normalize_log_weights(const Eigen::VectorXd& log_weights, Eigen::VectorXd& out);

struct ResampleResult {
  ParticleEnsemble ensemble;
  std::vector<std::size_t> ancestors;
};

/// Systematic resampling with the single draw u in [0, 1): offspring i is the
/// particle whose cumulative weight interval contains (u + i) / N.
ResampleResult systematic_resample(const ParticleEnsemble& ensemble, double u);

/// Weighted mean and (biased) weighted covariance.
EnsembleMoments empirical_moments(const ParticleEnsemble& ensemble);

Eigen::VectorXd weighted_mean(const std::vector<Eigen::VectorXd>& states, const Eigen::VectorXd& weights);

}  // namespace nudgepf

#endif  // NUDGEPF_ENSEMBLE_HPP

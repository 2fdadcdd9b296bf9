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

#include "nudgepf/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include <Eigen/Cholesky>

namespace nudgepf {

namespace {

constexpr double kNormalizationTolerance = 1e-9;

void require_normalized(const Eigen::VectorXd& weights) {
  if (weights.size() == 0) {
    throw std::invalid_argument("empty weight vector");
  }
  if ((weights.array() < 0.0).any() || !weights.allFinite()) {
    throw std::invalid_argument("weights must be finite and nonnegative");
  }
  if (std::abs(weights.sum() - 1.0) > kNormalizationTolerance) {
    throw std::invalid_argument("weights are not normalized");
  }
}

}  // namespace

ParticleEnsemble ParticleEnsemble::uniform(std::vector<Eigen::VectorXd> states, double time) {
  const auto n = static_cast<Eigen::Index>(states.size());
  if (n == 0) {
    throw std::invalid_argument("ensemble needs at least one particle");
  }
  return ParticleEnsemble{std::move(states), Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)), time};
}

void validate(const ParticleEnsemble& ensemble) {
  if (ensemble.states.empty() || static_cast<std::size_t>(ensemble.weights.size()) != ensemble.states.size()) {
    throw std::invalid_argument("ensemble states and weights disagree in size");
  }
  require_normalized(ensemble.weights);
  for (const auto& s : ensemble.states) {
    if (!s.allFinite() || s.size() != ensemble.dimension()) {
      throw std::invalid_argument("ensemble state is non-finite or has the wrong dimension");
    }
  }
}

ObservationModel::ObservationModel(Eigen::MatrixXd op, Eigen::MatrixXd noise_covariance)
    : op_(std::move(op)), noise_covariance_(std::move(noise_covariance)) {
  if (noise_covariance_.rows() != op_.rows() || noise_covariance_.cols() != op_.rows()) {
    throw std::invalid_argument("observation noise covariance has the wrong shape");
  }
  if (!noise_covariance_.isApprox(noise_covariance_.transpose(), 1e-12)) {
    throw std::invalid_argument("observation noise covariance must be symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(noise_covariance_);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("observation noise covariance must be positive-definite");
  }
  noise_precision_ = llt.solve(Eigen::MatrixXd::Identity(op_.rows(), op_.rows()));
}

ObservationModel ObservationModel::identity(Eigen::Index dimension, double variance) {
  return ObservationModel(
      Eigen::MatrixXd::Identity(dimension, dimension), variance * Eigen::MatrixXd::Identity(dimension, dimension));
}

double ObservationModel::log_likelihood(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  const Eigen::VectorXd r = y - op_ * x;
  return -0.5 * r.dot(noise_precision_ * r);
}

Eigen::VectorXd ObservationModel::cost_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  return -op_.transpose() * (noise_precision_ * (y - op_ * x));
}

double effective_sample_size(const Eigen::VectorXd& weights) {
  require_normalized(weights);
  // (sum w)^2 / sum w^2 on weights scaled by their maximum; equal to 1 / sum w^2
  // for normalized weights and exact for equal weights.
  const Eigen::VectorXd scaled = weights / weights.maxCoeff();
  const double total = scaled.sum();
  return total * total / scaled.squaredNorm();
}

double normalized_effective_sample_size(const Eigen::VectorXd& weights) {
  return effective_sample_size(weights) / static_cast<double>(weights.size());
}

bool needs_resampling(const Eigen::VectorXd& weights, double threshold) {
  return effective_sample_size(weights) < threshold * static_cast<double>(weights.size());
}

bool normalize_log_weights(const Eigen::VectorXd& log_weights, Eigen::VectorXd& out) {
  double max_log = -std::numeric_limits<double>::infinity();
  for (const double lw : log_weights) {
    if (!std::isnan(lw)) {
      max_log = std::max(max_log, lw);
    }
  }
  if (!std::isfinite(max_log)) {
    return false;
  }
  out.resize(log_weights.size());
  for (Eigen::Index i = 0; i < log_weights.size(); ++i) {
    out[i] = std::isnan(log_weights[i]) ? 0.0 : std::exp(log_weights[i] - max_log);
  }
  out /= out.sum();
  return true;
}

ReweightResult bayes_reweight(
    const ParticleEnsemble& ensemble,
    const Eigen::VectorXd& observation,
    const ObservationModel& obs_model,
    const Eigen::VectorXd& log_extra_factors) {
  const auto n = static_cast<Eigen::Index>(ensemble.size());
  if (log_extra_factors.size() != 0 && log_extra_factors.size() != n) {
    throw std::invalid_argument("one extra factor per particle required");
  }
  Eigen::VectorXd log_weights(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double extra = log_extra_factors.size() == 0 ? 0.0 : log_extra_factors[i];
    log_weights[i] = std::log(ensemble.weights[i]) + extra +
                     obs_model.log_likelihood(ensemble.states[static_cast<std::size_t>(i)], observation);
  }
  ReweightResult result{ensemble, false};
  if (!normalize_log_weights(log_weights, result.ensemble.weights)) {
    result.ensemble.weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    result.collapsed = true;
  }
  return result;
}

ResampleResult systematic_resample(const ParticleEnsemble& ensemble, double u) {
  require_normalized(ensemble.weights);
  if (!(u >= 0.0 && u < 1.0)) {
    throw std::invalid_argument("systematic resampling draw must lie in [0, 1)");
  }
  const std::size_t n = ensemble.size();
  ResampleResult result;
  result.ancestors.reserve(n);
  result.ensemble.states.reserve(n);
  result.ensemble.time = ensemble.time;

  // Cumulative weights are kept in units of 1/N so that the strata u + i and
  // the interval ends stay exact for equal weights.
  std::size_t last = n - 1;
  while (last > 0 && ensemble.weights[static_cast<Eigen::Index>(last)] <= 0.0) {
    --last;
  }
  const double scale = static_cast<double>(n);
  double cumulative = scale * ensemble.weights[0];
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double point = u + static_cast<double>(i);
    while (point >= cumulative && j < last) {
      ++j;
      cumulative += scale * ensemble.weights[static_cast<Eigen::Index>(j)];
    }
    result.ancestors.push_back(j);
    result.ensemble.states.push_back(ensemble.states[j]);
  }
  result.ensemble.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
  return result;
}

Eigen::VectorXd weighted_mean(const std::vector<Eigen::VectorXd>& states, const Eigen::VectorXd& weights) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(states.front().size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    mean += weights[static_cast<Eigen::Index>(i)] * states[i];
  }
  return mean;
}

EnsembleMoments empirical_moments(const ParticleEnsemble& ensemble) {
  EnsembleMoments moments;
  moments.mean = weighted_mean(ensemble.states, ensemble.weights);
  const auto d = ensemble.dimension();
  moments.covariance = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    const Eigen::VectorXd dx = ensemble.states[i] - moments.mean;
    moments.covariance.noalias() += ensemble.weights[static_cast<Eigen::Index>(i)] * (dx * dx.transpose());
  }
  moments.covariance = 0.5 * (moments.covariance + moments.covariance.transpose());
  return moments;
}

}  // namespace nudgepf

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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "nudgepf/bootstrap_pf.hpp"
#include "nudgepf/nudging.hpp"
#include "nudgepf/rng.hpp"
#include "oracles.hpp"

namespace {

using nudgepf::NudgingConfig;
using nudgepf::ObservationModel;
using nudgepf::ParticleEnsemble;
using nudgepf::SdeModel;

constexpr double kInf = std::numeric_limits<double>::infinity();
const Eigen::Vector3d kStar(1.508870, -1.531271, 25.46091);

SdeModel ou_model(const oracle::OuProblem& p) {
  return nudgepf::make_linear_model(Eigen::MatrixXd::Constant(1, 1, p.a), Eigen::MatrixXd::Constant(1, 1, p.sigma));
}

Eigen::VectorXd scalar(double v) { return Eigen::VectorXd::Constant(1, v); }

ParticleEnsemble star_ensemble(std::size_t n, std::uint64_t seed) {
  nudgepf::Engine engine(seed);
  std::vector<Eigen::VectorXd> states;
  for (std::size_t i = 0; i < n; ++i) {
    states.push_back(kStar + std::sqrt(2.0) * nudgepf::standard_normal(engine, 3));
  }
  return ParticleEnsemble::uniform(std::move(states), 0.0);
}

TEST(EstimatePhiGrad, NoTerminalCost) {
  // H = 0 and y = 0 make the cost vanish identically.
  const ObservationModel obs(Eigen::MatrixXd::Zero(1, 3), Eigen::MatrixXd::Identity(1, 1));
  const SdeModel model = nudgepf::make_lorenz63();
  const auto est = nudgepf::estimate_phi_grad(model, obs, 0.0, kStar, 0.5, Eigen::VectorXd::Zero(1), 20, 0.01, 3);
  EXPECT_EQ(est.phi, 1.0);
  EXPECT_EQ(est.grad_phi, Eigen::VectorXd::Zero(3));
  EXPECT_FALSE(est.underflow);
  EXPECT_EQ(est.realization_steps, 20u * 50u);
}

TEST(EstimatePhiGrad, AgreesWithSampler) {
  const oracle::OuProblem p;
  const SdeModel model = ou_model(p);
  const ObservationModel obs = ObservationModel::identity(1, p.r);
  const auto est = nudgepf::estimate_phi_grad(model, obs, 0.0, scalar(0.4), p.tau, scalar(p.y), 300, 0.01, 17);
  nudgepf::FeynmanKacSampler sampler(model, obs, scalar(0.4), 50, 0.01, scalar(p.y), 17);
  sampler.add_realizations(300);
  EXPECT_NEAR(std::log(est.phi), sampler.log_phi(), 1e-12);
  EXPECT_NEAR(est.grad_log_phi[0], sampler.grad_log_phi()[0], 1e-12);
  EXPECT_NEAR(est.grad_phi[0], est.phi * est.grad_log_phi[0], 1e-12);
}

TEST(EstimatePhiGrad, MatchesOrnsteinUhlenbeckOracle) {
  // A fine step keeps the time-discretization bias well below the MC error.
  const oracle::OuProblem p;
  const SdeModel model = ou_model(p);
  const ObservationModel obs = ObservationModel::identity(1, p.r);
  const std::size_t n = 10000;
  for (const double x : {-1.5, -0.5, 0.0, 0.7, 1.5}) {
    const std::uint64_t seed = nudgepf::derive_seed({77, static_cast<std::uint64_t>(std::lround(10 * x + 100))});
    nudgepf::FeynmanKacSampler sampler(model, obs, scalar(x), 500, 0.001, scalar(p.y), seed);
    sampler.add_realizations(n);
    std::vector<double> w;
    std::vector<double> wg;
    for (const auto& r : sampler.realizations()) {
      w.push_back(std::exp(r.log_weight));
      wg.push_back(-std::exp(r.log_weight) * r.cost_sensitivity[0] * p.sigma * p.sigma);
    }
    const double phi = std::exp(sampler.log_phi());
    EXPECT_NEAR(phi, p.phi(x), 3.0 * oracle::mean_standard_error(w)) << "x = " << x;
    const Eigen::VectorXd u = nudgepf::feedback_control(phi, phi * sampler.grad_log_phi(), model.diffusion());
    EXPECT_NEAR(u[0], p.control(x), 3.0 * oracle::ratio_standard_error(wg, w)) << "x = " << x;
  }
}

TEST(EstimatePhiGrad, VanishingNoiseLimit) {
  const SdeModel model = nudgepf::make_lorenz63(nudgepf::L63Params{}, 1e-30 * Eigen::Matrix3d::Identity());
  const ObservationModel obs = ObservationModel::identity(3, 2.0);
  const Eigen::Vector3d target(-2.0, -3.0, 24.0);
  const auto est = nudgepf::estimate_phi_grad(model, obs, 0.0, kStar, 0.3, target, 5, 0.01, 9);
  const Eigen::VectorXd end = nudgepf::deterministic_flow(model.deterministic(), kStar, 30, 0.01);
  const double expected = std::exp(-obs.cost(end, target));
  EXPECT_NEAR(est.phi, expected, 1e-9 * expected);
  nudgepf::FeynmanKacSampler sampler(model, obs, kStar, 30, 0.01, target, 9);
  sampler.add_realizations(5);
  for (const auto& r : sampler.realizations()) {
    EXPECT_NEAR(r.log_weight, std::log(expected), 1e-9);
  }
}

TEST(EstimatePhiGrad, UnderflowIsFlagged) {
  const SdeModel model = nudgepf::make_lorenz63();
  const ObservationModel obs = ObservationModel::identity(3, 1e-6);
  const auto est =
      nudgepf::estimate_phi_grad(model, obs, 0.0, kStar, 0.5, Eigen::Vector3d(1e3, 1e3, 1e3), 4, 0.01, 1);
  EXPECT_TRUE(est.underflow);
  EXPECT_EQ(est.phi, nudgepf::kPhiFloor);
}

TEST(EstimatePhiGrad, RejectsEmptyHorizon) {
  const oracle::OuProblem p;
  const SdeModel model = ou_model(p);
  const ObservationModel obs = ObservationModel::identity(1, p.r);
  EXPECT_THROW(nudgepf::estimate_phi_grad(model, obs, 0.5, scalar(0.0), 0.5, scalar(0.0), 4, 0.01, 1),
               std::invalid_argument);
}

TEST(FeynmanKacSampler, PhiGrowsAsTargetApproachesEndpoints) {
  const oracle::OuProblem p;
  const SdeModel model = ou_model(p);
  const ObservationModel obs = ObservationModel::identity(1, p.r);
  const double x = 0.8;
  nudgepf::FeynmanKacSampler reference(model, obs, scalar(x), 50, 0.01, scalar(0.0), 31);
  reference.add_realizations(500);
  double centre = 0.0;
  for (const auto& r : reference.realizations()) {
    centre += r.endpoint[0];
  }
  centre /= 500.0;
  double previous = 0.0;
  for (int k = 0; k <= 20; ++k) {
    const double target = centre + 6.0 * (1.0 - k / 20.0);
    nudgepf::FeynmanKacSampler sampler(model, obs, scalar(x), 50, 0.01, scalar(target), 31);
    sampler.add_realizations(500);
    const double phi = std::exp(sampler.log_phi());
    EXPECT_GE(phi, previous) << "target " << target;
    previous = phi;
  }
}

TEST(FeynmanKacSampler, BatchingDoesNotChangeRealizations) {
  const SdeModel model = nudgepf::make_lorenz63();
  const ObservationModel obs = ObservationModel::identity(3, 2.0);
  nudgepf::FeynmanKacSampler a(model, obs, kStar, 20, 0.01, kStar, 5);
  nudgepf::FeynmanKacSampler b(model, obs, kStar, 20, 0.01, kStar, 5);
  a.add_realizations(6);
  b.add_realizations(2);
  b.add_realizations(4);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t r = 0; r < a.size(); ++r) {
    EXPECT_EQ(a.realizations()[r].endpoint, b.realizations()[r].endpoint);
    EXPECT_EQ(a.realizations()[r].cost_sensitivity, b.realizations()[r].cost_sensitivity);
  }
  EXPECT_EQ(a.realization_steps(), 120u);
}

TEST(FeynmanKacSampler, SensitivityUsesFundamentalMatrix) {
  // Noise-free linear flow: Psi = exp(A tau), so the sensitivity is Psi^T grad c.
  Eigen::Matrix2d a;
  a << -0.4, 1.0, -1.0, -0.2;
  const SdeModel model = nudgepf::make_linear_model(a, 1e-300 * Eigen::Matrix2d::Identity());
  const ObservationModel obs = ObservationModel::identity(2, 0.7);
  const Eigen::Vector2d x(1.0, -0.5);
  const Eigen::Vector2d y(0.2, 0.3);
  nudgepf::FeynmanKacSampler sampler(model, obs, x, 100, 0.01, y, 2);
  sampler.add_realizations(1);
  const Eigen::MatrixXd psi = (a * 1.0).exp();
  const Eigen::VectorXd end = psi * x;
  const Eigen::VectorXd expected = psi.transpose() * obs.cost_gradient(end, y);
  EXPECT_LT((sampler.realizations()[0].cost_sensitivity - expected).norm(), 1e-8);
}

TEST(FeedbackControl, ZeroGradientGivesZeroControl) {
  EXPECT_EQ(nudgepf::feedback_control(0.3, Eigen::Vector3d::Zero(), nudgepf::default_l63_diffusion()),
            Eigen::VectorXd::Zero(3));
}

TEST(FeedbackControl, IdentityDiffusion) {
  const Eigen::Vector3d g(0.2, -0.4, 1.0);
  const Eigen::VectorXd u = nudgepf::feedback_control(0.5, g, Eigen::Matrix3d::Identity());
  EXPECT_EQ(u, (g / 0.5).eval());
}

TEST(FeedbackControl, AppliesDiffusion) {
  const Eigen::Vector3d g(0.2, -0.4, 1.0);
  const Eigen::Matrix3d r = nudgepf::default_l63_diffusion();
  EXPECT_LT((nudgepf::feedback_control(0.25, g, r) - r * g * 4.0).norm(), 1e-14);
}

TEST(AdaptiveControl, NoTerminalCostConvergesAtSecondBatch) {
  const ObservationModel obs(Eigen::MatrixXd::Zero(1, 3), Eigen::MatrixXd::Identity(1, 1));
  const SdeModel model = nudgepf::make_lorenz63();
  const auto est =
      nudgepf::adaptive_control(model, obs, 0.0, kStar, 0.5, Eigen::VectorXd::Zero(1), 0.01, NudgingConfig{}, 4);
  EXPECT_TRUE(est.converged);
  EXPECT_EQ(est.batches, 2);
  EXPECT_EQ(est.realizations_used, 4u);
  EXPECT_EQ(est.control, Eigen::VectorXd::Zero(3));
  ASSERT_EQ(est.normalized_variation_history.size(), 1u);
  EXPECT_EQ(est.normalized_variation_history[0], 0.0);
}

TEST(AdaptiveControl, ConvergedFlagMatchesHistory) {
  const SdeModel model = nudgepf::make_lorenz63();
  const ObservationModel obs = ObservationModel::identity(3, 2.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto est = nudgepf::adaptive_control(
        model, obs, 0.0, kStar, 0.5, Eigen::Vector3d(-1.0, -4.0, 22.0), 0.01, NudgingConfig{}, seed);
    EXPECT_EQ(est.realizations_used, static_cast<std::size_t>(est.batches) * 2u);
    EXPECT_LE(est.batches, 50);
    if (est.converged) {
      ASSERT_FALSE(est.normalized_variation_history.empty());
      EXPECT_LE(est.normalized_variation_history.back(), 0.1);
    }
    EXPECT_GT(est.phi, 0.0);
    EXPECT_LE(est.phi, 1.0);
  }
}

TEST(AdaptiveControl, OrnsteinUhlenbeckGain) {
  const oracle::OuProblem p;
  const SdeModel model = ou_model(p);
  const ObservationModel obs = ObservationModel::identity(1, p.r);
  const int seeds = 100;
  for (const double x : {-1.5, 1.5}) {
    std::vector<double> bias;
    for (const double tol : {0.1, 1e-3}) {
      NudgingConfig config;
      config.tolerance = tol;
      config.max_batches = 5000;
      double total = 0.0;
      for (int s = 0; s < seeds; ++s) {
        const auto est = nudgepf::adaptive_control(
            model, obs, 0.0, scalar(x), p.tau, scalar(p.y), 0.01, config, static_cast<std::uint64_t>(s));
        EXPECT_TRUE(est.converged);
        total += est.control[0];
      }
      bias.push_back(std::abs(total / seeds - p.control(x)));
    }
    EXPECT_LT(bias[1], bias[0]) << "x = " << x;
    EXPECT_LT(bias[1], 0.1 * std::abs(p.control(x))) << "x = " << x;
  }
}

TEST(AdaptiveControl, DeterministicAndMonotoneInTolerance) {
  const SdeModel model = nudgepf::make_lorenz63();
  const ObservationModel obs = ObservationModel::identity(3, 2.0);
  const Eigen::Vector3d target(-2.0, -5.0, 21.0);
  std::size_t previous = 0;
  for (const double tol : {1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01}) {
    NudgingConfig config;
    config.tolerance = tol;
    const auto a = nudgepf::adaptive_control(model, obs, 0.0, kStar, 0.5, target, 0.01, config, 12);
    const auto b = nudgepf::adaptive_control(model, obs, 0.0, kStar, 0.5, target, 0.01, config, 12);
    EXPECT_EQ(a.control, b.control);
    EXPECT_EQ(a.realizations_used, b.realizations_used);
    EXPECT_GE(a.realizations_used, previous) << "tolerance " << tol;
    previous = a.realizations_used;
  }
}

TEST(NudgingConfig, Validation) {
  NudgingConfig c;
  EXPECT_NO_THROW(nudgepf::validate(c));
  c.subintervals = 0;
  EXPECT_THROW(nudgepf::validate(c), std::invalid_argument);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(nudgepf::validate(c), std::invalid_argument);
  c = {};
  c.tolerance = 0.0;
  EXPECT_THROW(nudgepf::validate(c), std::invalid_argument);
  c = {};
  c.max_batches = 0;
  EXPECT_THROW(nudgepf::validate(c), std::invalid_argument);
  c = {};
  c.rollback_log_threshold = kInf;
  EXPECT_NO_THROW(nudgepf::validate(c));
}

TEST(RnLogIncrement, ZeroControl) {
  const std::vector<Eigen::VectorXd> v(10, Eigen::VectorXd::Zero(3));
  const auto path = nudgepf::generate_brownian_path(3, 0.01, 10, 8);
  EXPECT_EQ(nudgepf::rn_log_increment(v, path.increments, 0.01), 0.0);
}

TEST(RnLogIncrement, ConstantControlClosedForm) {
  const Eigen::Vector3d v(0.7, -1.2, 0.4);
  const std::vector<Eigen::VectorXd> vs(25, v);
  const auto path = nudgepf::generate_brownian_path(3, 0.02, 25, 10);
  Eigen::Vector3d w = Eigen::Vector3d::Zero();
  for (const auto& dw : path.increments) {
    w += dw;
  }
  const double expected = -v.dot(w) - 0.5 * v.squaredNorm() * 0.5;
  EXPECT_NEAR(nudgepf::rn_log_increment(vs, path.increments, 0.02), expected, 1e-13);
}

TEST(RnLogIncrement, GirsanovMartingale) {
  const SdeModel model = nudgepf::make_lorenz63();
  std::vector<Eigen::VectorXd> v;
  for (int s = 0; s < 50; ++s) {
    const double t = 0.01 * s;
    v.push_back(model.dispersion().transpose() * Eigen::Vector3d(std::sin(6.0 * t), 0.5, -std::cos(3.0 * t)));
  }
  std::vector<double> factors;
  for (std::uint64_t m = 0; m < 10000; ++m) {
    const auto path = nudgepf::generate_brownian_path(3, 0.01, 50, nudgepf::derive_seed({2024, m}));
    factors.push_back(std::exp(nudgepf::rn_log_increment(v, path.increments, 0.01)));
  }
  double mean = 0.0;
  for (const double f : factors) {
    mean += f;
  }
  mean /= static_cast<double>(factors.size());
  EXPECT_NEAR(mean, 1.0, 3.0 * oracle::mean_standard_error(factors));
}

TEST(RollbackTest, Examples) {
  NudgingConfig c;
  EXPECT_FALSE(nudgepf::rollback_test(nudgepf::expected_log_rn_increment(Eigen::Vector3d::Zero(), 0.1), c));
  c.rollback_log_threshold = -kInf;
  EXPECT_FALSE(nudgepf::rollback_test(nudgepf::expected_log_rn_increment(Eigen::Vector3d(1e3, 0, 0), 0.1), c));
  c.rollback_log_threshold = 0.0;
  EXPECT_TRUE(nudgepf::rollback_test(nudgepf::expected_log_rn_increment(Eigen::Vector3d(1e-3, 0, 0), 0.1), c));
  EXPECT_FALSE(nudgepf::rollback_test(nudgepf::expected_log_rn_increment(Eigen::Vector3d::Zero(), 0.1), c));
  c.rollback_log_threshold = -2.0;
  EXPECT_FALSE(nudgepf::rollback_test(nudgepf::expected_log_rn_increment(Eigen::Vector3d(6.0, 0, 0), 0.1), c));
  EXPECT_TRUE(nudgepf::rollback_test(nudgepf::expected_log_rn_increment(Eigen::Vector3d(6.5, 0, 0), 0.1), c));
}

TEST(NudgingBmRatio, Examples) {
  const Eigen::Matrix3d sigma = nudgepf::make_lorenz63().dispersion();
  const Eigen::Vector3d dw(0.05, -0.11, 0.02);
  EXPECT_EQ(nudgepf::compute_nudging_bm_ratio(Eigen::Vector3d::Zero(), dw, 0.01, sigma), 0.0);
  const Eigen::VectorXd u = sigma * dw / 0.01;
  EXPECT_NEAR(nudgepf::compute_nudging_bm_ratio(u, dw, 0.01, sigma), 1.0, 1e-14);
  EXPECT_TRUE(std::isnan(nudgepf::compute_nudging_bm_ratio(u, Eigen::Vector3d::Zero(), 0.01, sigma)));
}

TEST(NpfCycle, ForcedZeroControlIsBootstrapBitwise) {
  const SdeModel model = nudgepf::make_lorenz63();
  const ObservationModel obs = ObservationModel::identity(3, 2.0);
  NudgingConfig config;
  config.rollback_log_threshold = kInf;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto ens = star_ensemble(10, seed);
    const Eigen::Vector3d y(-3.0, -5.5, 21.0);
    const auto pf_streams = nudgepf::make_cycle_streams(seed, 7, 0, 10, 3, 0.01, 50);
    const auto pf = nudgepf::pf_assimilation_cycle(ens, model, obs, y, 0.0, 0.5, pf_streams);
    const auto npf = nudgepf::npf_assimilation_cycle(ens, model, obs, y, 0.0, 0.5, config, pf_streams);
    EXPECT_EQ(npf.ensemble.states, pf.ensemble.states);
    EXPECT_EQ(npf.ensemble.weights, pf.ensemble.weights);
    EXPECT_EQ(npf.diagnostics.trajectories, pf.diagnostics.trajectories);
    EXPECT_EQ(npf.diagnostics.posterior.weights, pf.diagnostics.posterior.weights);
    EXPECT_EQ(npf.diagnostics.resampled, pf.diagnostics.resampled);
    EXPECT_EQ(npf.diagnostics.log_rn, Eigen::VectorXd::Zero(10));
    EXPECT_EQ(npf.diagnostics.rollbacks, 50u);
  }
}

TEST(NpfCycle, HorizonsShrinkTowardTheObservation) {
  const SdeModel model = nudgepf::make_lorenz63();
  const ObservationModel obs = ObservationModel::identity(3, 2.0);
  const auto ens = star_ensemble(4, 3);
  const auto streams = nudgepf::make_cycle_streams(3, 7, 0, 4, 3, 0.01, 50);
  const auto out = nudgepf::npf_assimilation_cycle(
      ens, model, obs, Eigen::Vector3d(-3.0, -5.5, 21.0), 0.0, 0.5, NudgingConfig{}, streams);
  ASSERT_EQ(out.diagnostics.controls.size(), 20u);
  std::size_t steps = 0;
  for (const auto& c : out.diagnostics.controls) {
    EXPECT_EQ(c.horizon_steps, 50u - 10u * c.subinterval);
    steps += c.realizations * c.horizon_steps;
  }
  EXPECT_EQ(steps, out.diagnostics.realization_steps);
}

TEST(NpfCycle, RnFactorsMatchAppliedControls) {
  const SdeModel model = nudgepf::make_lorenz63();
  const ObservationModel obs = ObservationModel::identity(3, 2.0);
  NudgingConfig config;
  config.rollback_log_threshold = -kInf;
  const auto ens = star_ensemble(3, 4);
  const auto streams = nudgepf::make_cycle_streams(4, 7, 0, 3, 3, 0.01, 50);
  const Eigen::Vector3d y(-3.0, -5.5, 21.0);
  const auto out = nudgepf::npf_assimilation_cycle(ens, model, obs, y, 0.0, 0.5, config, streams, {false, 0.5});
  EXPECT_EQ(out.diagnostics.rollbacks, 0u);
  for (Eigen::Index i = 0; i < 3; ++i) {
    EXPECT_LT(out.diagnostics.log_rn[i], 1e3);
    EXPECT_NE(out.diagnostics.log_rn[i], 0.0);
  }
  // Prior weights carry the RN factors; posterior adds the likelihood.
  Eigen::VectorXd expected(3);
  for (Eigen::Index i = 0; i < 3; ++i) {
    expected[i] = out.diagnostics.log_rn[i] + obs.log_likelihood(out.diagnostics.prior.states[i], y);
  }
  expected = (expected.array() - expected.maxCoeff()).exp();
  expected /= expected.sum();
  EXPECT_LT((out.ensemble.weights - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(NpfCycle, UncontrolledParticleHasUnitRnFactor) {
  const SdeModel model = nudgepf::make_lorenz63();
  const ObservationModel obs = ObservationModel::identity(3, 2.0);
  NudgingConfig config;
  config.rollback_log_threshold = 0.0;
  const auto ens = star_ensemble(5, 6);
  const auto streams = nudgepf::make_cycle_streams(6, 7, 0, 5, 3, 0.01, 50);
  const auto out =
      nudgepf::npf_assimilation_cycle(ens, model, obs, Eigen::Vector3d(-3.0, -5.5, 21.0), 0.0, 0.5, config, streams);
  EXPECT_EQ(out.diagnostics.log_rn, Eigen::VectorXd::Zero(5));
  EXPECT_EQ(out.diagnostics.nudge_ratio.array().isNaN().count(), out.diagnostics.nudge_ratio.size());
  EXPECT_EQ(out.diagnostics.proposed_ratio.array().isNaN().count(), 0);
}

}  // namespace

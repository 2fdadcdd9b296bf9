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
#include "nudgepf/var_npf.hpp"

namespace {

using nudgepf::NudgingConfig;
using nudgepf::ObservationModel;
using nudgepf::ParticleEnsemble;
using nudgepf::SdeModel;
using nudgepf::VariationalConfig;

const Eigen::Vector3d kStar(1.508870, -1.531271, 25.46091);
const Eigen::Vector3d kObservation(-3.0, -5.5, 21.0);

ParticleEnsemble star_ensemble(std::size_t n, std::uint64_t seed) {
  nudgepf::Engine engine(seed);
  std::vector<Eigen::VectorXd> states;
  for (std::size_t i = 0; i < n; ++i) {
    states.push_back(kStar + std::sqrt(2.0) * nudgepf::standard_normal(engine, 3));
  }
  return ParticleEnsemble::uniform(std::move(states), 0.0);
}

void expect_same_cycle(const nudgepf::CycleResult& a, const nudgepf::CycleResult& b) {
  EXPECT_EQ(a.ensemble.states, b.ensemble.states);
  EXPECT_EQ(a.ensemble.weights, b.ensemble.weights);
  EXPECT_EQ(a.diagnostics.trajectories, b.diagnostics.trajectories);
  EXPECT_EQ(a.diagnostics.posterior.weights, b.diagnostics.posterior.weights);
  EXPECT_EQ(a.diagnostics.log_rn, b.diagnostics.log_rn);
  EXPECT_EQ(a.diagnostics.resampled, b.diagnostics.resampled);
  EXPECT_EQ(a.diagnostics.rollbacks, b.diagnostics.rollbacks);
  EXPECT_EQ(a.diagnostics.realization_steps, b.diagnostics.realization_steps);
}

double mean_control(const nudgepf::CycleResult& r) {
  double total = 0.0;
  for (const auto& c : r.diagnostics.controls) {
    total += c.control_norm;
  }
  return total / static_cast<double>(r.diagnostics.controls.size());
}

TEST(VarNpfCycle, SingleSubintervalConsistentObservationIsNpf) {
  const SdeModel model = nudgepf::make_lorenz63();
  const ObservationModel obs = ObservationModel::identity(3, 2.0);
  NudgingConfig config;
  config.subintervals = 1;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto ens = star_ensemble(10, seed);
    const auto moments = nudgepf::empirical_moments(ens);
    const Eigen::VectorXd y = nudgepf::deterministic_flow(model.deterministic(), moments.mean, 50, 0.01);
    const auto streams = nudgepf::make_cycle_streams(seed, 9, 0, 10, 3, 0.01, 50);
    const auto npf = nudgepf::npf_assimilation_cycle(ens, model, obs, y, 0.0, 0.5, config, streams);
    const auto var =
        nudgepf::var_npf_assimilation_cycle(ens, model, obs, y, 0.0, 0.5, config, VariationalConfig{}, streams);
    EXPECT_EQ(var.diagnostics.variational.terminal_residual, 0.0);
    expect_same_cycle(var, npf);
  }
}

TEST(VarNpfCycle, ForcedZeroControlIsBootstrap) {
  const SdeModel model = nudgepf::make_lorenz63();
  const ObservationModel obs = ObservationModel::identity(3, 2.0);
  NudgingConfig config;
  config.rollback_log_threshold = std::numeric_limits<double>::infinity();
  const auto ens = star_ensemble(10, 4);
  const auto streams = nudgepf::make_cycle_streams(4, 9, 0, 10, 3, 0.01, 50);
  const auto pf = nudgepf::pf_assimilation_cycle(ens, model, obs, kObservation, 0.0, 0.5, streams);
  const auto var = nudgepf::var_npf_assimilation_cycle(
      ens, model, obs, kObservation, 0.0, 0.5, config, VariationalConfig{}, streams);
  EXPECT_EQ(var.ensemble.states, pf.ensemble.states);
  EXPECT_EQ(var.ensemble.weights, pf.ensemble.weights);
  EXPECT_EQ(var.diagnostics.trajectories, pf.diagnostics.trajectories);
  EXPECT_EQ(var.diagnostics.posterior.weights, pf.diagnostics.posterior.weights);
}

TEST(VarNpfCycle, EveryHorizonIsOneSubinterval) {
  const SdeModel model = nudgepf::make_lorenz63();
  const ObservationModel obs = ObservationModel::identity(3, 2.0);
  const auto ens = star_ensemble(10, 5);
  const auto streams = nudgepf::make_cycle_streams(5, 9, 0, 10, 3, 0.01, 50);
  const auto var = nudgepf::var_npf_assimilation_cycle(
      ens, model, obs, kObservation, 0.0, 0.5, NudgingConfig{}, VariationalConfig{}, streams);
  ASSERT_EQ(var.diagnostics.controls.size(), 50u);
  std::size_t steps = 0;
  for (const auto& c : var.diagnostics.controls) {
    EXPECT_EQ(c.horizon_steps, 10u);
    steps += c.realizations * c.horizon_steps;
  }
  EXPECT_EQ(steps, var.diagnostics.realization_steps);
  EXPECT_TRUE(var.diagnostics.variational.ran);
  EXPECT_EQ(var.diagnostics.variational.solves, 1);
}

TEST(VarNpfCycle, WorkloadBelowHalfOfNpf) {
  const SdeModel model = nudgepf::make_lorenz63();
  const ObservationModel obs = ObservationModel::identity(3, 2.0);
  std::size_t var_steps = 0;
  std::size_t npf_steps = 0;
  std::size_t var_realizations = 0;
  std::size_t npf_realizations = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto ens = star_ensemble(10, seed);
    const auto streams = nudgepf::make_cycle_streams(seed, 9, 0, 10, 3, 0.01, 50);
    const auto npf = nudgepf::npf_assimilation_cycle(ens, model, obs, kObservation, 0.0, 0.5, NudgingConfig{}, streams);
    const auto var = nudgepf::var_npf_assimilation_cycle(
        ens, model, obs, kObservation, 0.0, 0.5, NudgingConfig{}, VariationalConfig{}, streams);
    var_steps += var.diagnostics.realization_steps;
    npf_steps += npf.diagnostics.realization_steps;
    for (const auto& c : var.diagnostics.controls) {
      var_realizations += c.realizations;
    }
    for (const auto& c : npf.diagnostics.controls) {
      npf_realizations += c.realizations;
    }
  }
  // Per realization the horizons average M sub-steps against (M + 1) / 2 * M.
  const double per_realization = (static_cast<double>(var_steps) / static_cast<double>(var_realizations)) /
                                 (static_cast<double>(npf_steps) / static_cast<double>(npf_realizations));
  EXPECT_LT(per_realization, 0.5);
  EXPECT_LT(static_cast<double>(var_steps) / static_cast<double>(npf_steps), 0.5);
}

TEST(VarNpfCycle, FullHorizonProviderReducesToNpf) {
  const SdeModel model = nudgepf::make_lorenz63();
  const ObservationModel obs = ObservationModel::identity(3, 2.0);
  const auto ens = star_ensemble(10, 6);
  const auto streams = nudgepf::make_cycle_streams(6, 9, 0, 10, 3, 0.01, 50);
  const nudgepf::TargetProvider full = [](std::size_t, const std::vector<Eigen::VectorXd>&, const Eigen::VectorXd&) {
    return nudgepf::SubintervalTarget{50, kObservation};
  };
  const auto custom =
      nudgepf::nudged_cycle(ens, model, obs, kObservation, 0.0, 0.5, NudgingConfig{}, streams, {}, full);
  const auto npf = nudgepf::npf_assimilation_cycle(ens, model, obs, kObservation, 0.0, 0.5, NudgingConfig{}, streams);
  expect_same_cycle(custom, npf);
}

TEST(VarNpfCycle, PerSubintervalResolve) {
  const SdeModel model = nudgepf::make_lorenz63();
  const ObservationModel obs = ObservationModel::identity(3, 2.0);
  VariationalConfig variational;
  variational.resolve_per_subinterval = true;
  const auto ens = star_ensemble(10, 7);
  const auto streams = nudgepf::make_cycle_streams(7, 9, 0, 10, 3, 0.01, 50);
  const auto var = nudgepf::var_npf_assimilation_cycle(
      ens, model, obs, kObservation, 0.0, 0.5, NudgingConfig{}, variational, streams);
  EXPECT_EQ(var.diagnostics.variational.solves, 5);
  for (const auto& c : var.diagnostics.controls) {
    EXPECT_EQ(c.horizon_steps, 10u);
  }
}

TEST(VarNpfCycle, IterationCapStillCompletes) {
  const SdeModel model = nudgepf::make_lorenz63();
  const ObservationModel obs = ObservationModel::identity(3, 2.0);
  VariationalConfig variational;
  variational.max_iterations = 1;
  const auto ens = star_ensemble(10, 8);
  const auto streams = nudgepf::make_cycle_streams(8, 9, 0, 10, 3, 0.01, 50);
  const auto var = nudgepf::var_npf_assimilation_cycle(
      ens, model, obs, Eigen::Vector3d(-8.0, -9.0, 20.0), 0.0, 0.5, NudgingConfig{}, variational, streams);
  EXPECT_EQ(var.diagnostics.variational.status, "max_iterations");
  EXPECT_EQ(var.diagnostics.variational.iterations, 1);
  EXPECT_NO_THROW(nudgepf::validate(var.ensemble));
}

TEST(VarNpfCycle, ReweightTarget) {
  const SdeModel model = nudgepf::make_lorenz63();
  const ObservationModel obs = ObservationModel::identity(3, 2.0);
  const auto ens = star_ensemble(10, 9);
  const auto streams = nudgepf::make_cycle_streams(9, 9, 0, 10, 3, 0.01, 50);
  nudgepf::ResamplingPolicy keep;
  keep.enabled = false;
  for (const bool pseudo : {false, true}) {
    VariationalConfig variational;
    variational.reweight_against_pseudo = pseudo;
    const auto var = nudgepf::var_npf_assimilation_cycle(
        ens, model, obs, kObservation, 0.0, 0.5, NudgingConfig{}, variational, streams, keep);
    const auto moments = nudgepf::empirical_moments(ens);
    const auto problem =
        nudgepf::make_variational_problem(moments, kObservation, obs, model, 0.0, 0.5, 0.01, variational);
    const auto opt = nudgepf::minimize_cost(problem, moments.mean, variational);
    const Eigen::VectorXd pseudo_y = nudgepf::deterministic_flow(model.deterministic(), opt.x, 50, 0.01);
    const Eigen::VectorXd target = pseudo ? pseudo_y : Eigen::VectorXd(kObservation);
    Eigen::VectorXd expected(10);
    for (Eigen::Index i = 0; i < 10; ++i) {
      expected[i] = std::log(var.diagnostics.prior.weights[i]) +
                    obs.log_likelihood(var.diagnostics.prior.states[static_cast<std::size_t>(i)], target);
    }
    expected = (expected.array() - expected.maxCoeff()).exp();
    expected /= expected.sum();
    EXPECT_LT((var.diagnostics.posterior.weights - expected).cwiseAbs().maxCoeff(), 1e-10) << "pseudo " << pseudo;
  }
}

TEST(VarNpfCycle, SmallerControlsThanNpf) {
  const SdeModel model = nudgepf::make_lorenz63();
  const ObservationModel obs = ObservationModel::identity(3, 2.0);
  double var_total = 0.0;
  double npf_total = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto ens = star_ensemble(10, seed + 20);
    const auto streams = nudgepf::make_cycle_streams(seed, 9, 0, 10, 3, 0.01, 50);
    npf_total += mean_control(
        nudgepf::npf_assimilation_cycle(ens, model, obs, kObservation, 0.0, 0.5, NudgingConfig{}, streams));
    var_total += mean_control(nudgepf::var_npf_assimilation_cycle(
        ens, model, obs, kObservation, 0.0, 0.5, NudgingConfig{}, VariationalConfig{}, streams));
  }
  EXPECT_LT(var_total, npf_total);
}

}  // namespace

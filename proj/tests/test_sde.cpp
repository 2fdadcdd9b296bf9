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
#include <vector>

#include <Eigen/Dense>

#include "nudgepf/sde.hpp"

namespace {

using nudgepf::BrownianPath;
using nudgepf::L63Params;
using nudgepf::SdeModel;

constexpr double kBeta = 8.0 / 3.0;

Eigen::MatrixXd central_jacobian(const SdeModel& model, const Eigen::VectorXd& x, double h) {
  Eigen::MatrixXd jac(x.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Eigen::VectorXd xp = x;
    Eigen::VectorXd xm = x;
    xp[j] += h;
    xm[j] -= h;
    jac.col(j) = (model.drift(xp) - model.drift(xm)) / (2.0 * h);
  }
  return jac;
}

TEST(Lorenz63Drift, OriginIsFixed) {
  EXPECT_EQ(nudgepf::l63_drift(Eigen::Vector3d::Zero(), L63Params{}), Eigen::Vector3d::Zero());
}

TEST(Lorenz63Drift, HandEvaluation) {
  const Eigen::Vector3d f = nudgepf::l63_drift(Eigen::Vector3d::Ones(), L63Params{});
  EXPECT_DOUBLE_EQ(f[0], 0.0);
  EXPECT_DOUBLE_EQ(f[1], 26.0);
  EXPECT_DOUBLE_EQ(f[2], 1.0 - kBeta);
}

TEST(Lorenz63Drift, NontrivialFixedPoints) {
  const double c = std::sqrt(kBeta * 27.0);
  for (const double sign : {1.0, -1.0}) {
    const Eigen::Vector3d f = nudgepf::l63_drift(Eigen::Vector3d(sign * c, sign * c, 27.0), L63Params{});
    EXPECT_LT(f.cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Lorenz63Jacobian, AtOrigin) {
  Eigen::Matrix3d expected;
  expected << -10.0, 10.0, 0.0, 28.0, -1.0, 0.0, 0.0, 0.0, -kBeta;
  EXPECT_EQ(nudgepf::l63_jacobian(Eigen::Vector3d::Zero(), L63Params{}), expected);
}

TEST(Lorenz63Jacobian, MatchesFiniteDifferences) {
  const SdeModel model = nudgepf::make_lorenz63();
  const std::vector<Eigen::Vector3d> points = {
      {1.508870, -1.531271, 25.46091}, {-8.0, 3.5, 12.0}, {14.4, 11.2, 37.9}};
  for (const auto& p : points) {
    const Eigen::MatrixXd fd = central_jacobian(model, p, 1e-5);
    const Eigen::MatrixXd jac = model.drift_jacobian(p);
    EXPECT_LT((fd - jac).norm() / jac.norm(), 1e-6);
    for (Eigen::Index c = 0; c < 3; ++c) {
      EXPECT_NEAR(fd.col(c).sum(), jac.col(c).sum(), 1e-6 * (1.0 + std::abs(jac.col(c).sum())));
    }
  }
}

TEST(Lorenz63Jacobian, TraceIsStateIndependent) {
  for (const Eigen::Vector3d p : {Eigen::Vector3d(0.3, -2.0, 7.0), Eigen::Vector3d(-11.0, 5.0, 40.0)}) {
    EXPECT_DOUBLE_EQ(nudgepf::l63_jacobian(p, L63Params{}).trace(), -(10.0 + 1.0 + kBeta));
  }
}

TEST(SdeModel, DiffusionIsDispersionSquared) {
  const SdeModel model = nudgepf::make_lorenz63();
  const Eigen::MatrixXd& s = model.dispersion();
  EXPECT_LT((model.diffusion() - s * s.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((model.diffusion() - nudgepf::default_l63_diffusion()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE(s.isLowerTriangular());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(model.diffusion());
  EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
}

TEST(SdeModel, RejectsIndefiniteDiffusion) {
  Eigen::Matrix3d bad = Eigen::Matrix3d::Identity();
  bad(2, 2) = -1.0;
  EXPECT_THROW(nudgepf::make_lorenz63(L63Params{}, bad), std::invalid_argument);
  Eigen::Matrix3d asym = Eigen::Matrix3d::Identity();
  asym(0, 1) = 0.5;
  EXPECT_THROW(nudgepf::make_lorenz63(L63Params{}, asym), std::invalid_argument);
}

TEST(BrownianPath, IncrementStatistics) {
  const double dt = 0.01;
  const std::size_t n = 40000;
  const BrownianPath path = nudgepf::generate_brownian_path(3, dt, n, 17);
  ASSERT_EQ(path.increments.size(), n);
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& dw : path.increments) {
    ASSERT_EQ(dw.size(), 3);
    mean += dw;
  }
  mean /= static_cast<double>(n);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& dw : path.increments) {
    cov += (dw - mean) * (dw - mean).transpose();
  }
  cov /= static_cast<double>(n - 1);
  const double nd = static_cast<double>(n);
  for (Eigen::Index i = 0; i < 3; ++i) {
    EXPECT_LT(std::abs(mean[i]), 4.0 * std::sqrt(dt / nd));
    for (Eigen::Index j = 0; j < 3; ++j) {
      const double target = i == j ? dt : 0.0;
      const double sd = i == j ? dt * std::sqrt(2.0 / nd) : dt / std::sqrt(nd);
      EXPECT_LT(std::abs(cov(i, j) - target), 4.0 * sd) << i << "," << j;
    }
  }
}

TEST(BrownianPath, SeedsSelectStreams) {
  const auto a = nudgepf::generate_brownian_path(3, 0.01, 50, 5);
  const auto b = nudgepf::generate_brownian_path(3, 0.01, 50, 5);
  const auto c = nudgepf::generate_brownian_path(3, 0.01, 50, 6);
  EXPECT_EQ(a.increments, b.increments);
  EXPECT_NE(a.increments, c.increments);
}

TEST(StepCount, RequiresWholeSteps) {
  EXPECT_EQ(nudgepf::step_count(0.0, 0.5, 0.01), 50u);
  EXPECT_EQ(nudgepf::step_count(3.0, 3.5, 0.01), 50u);
  EXPECT_EQ(nudgepf::step_count(1.0, 1.0, 0.01), 0u);
  EXPECT_THROW(nudgepf::step_count(0.0, 0.505, 0.01), std::invalid_argument);
  EXPECT_THROW(nudgepf::step_count(1.0, 0.5, 0.01), std::invalid_argument);
}

TEST(IntegrateStep, LinearFlowIsFifthOrderLocally) {
  const double a = -1.3;
  const SdeModel model = nudgepf::make_linear_model(Eigen::MatrixXd::Constant(1, 1, a), Eigen::MatrixXd::Zero(1, 1));
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 2.0);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
  double previous = 0.0;
  for (const double dt : {0.2, 0.1, 0.05}) {
    const double err = std::abs(nudgepf::integrate_step(model, x, zero, dt, zero)[0] - std::exp(a * dt) * x[0]);
    // Leading term of the local error: |a dt|^5 / 5! |x|.
    EXPECT_LT(err, 1.1 * std::pow(std::abs(a) * dt, 5) / 120.0 * std::abs(x[0]));
    if (previous > 0.0) {
      // Halving dt cuts a fifth-order local error by about 32.
      EXPECT_GT(previous / err, 25.0);
      EXPECT_LT(previous / err, 40.0);
    }
    previous = err;
  }
}

TEST(IntegrateStep, PureDiffusionAddsSigmaDw) {
  Eigen::Matrix2d sigma;
  sigma << 1.5, 0.0, -0.4, 0.7;
  const SdeModel model = nudgepf::make_linear_model(Eigen::MatrixXd::Zero(2, 2), sigma);
  const Eigen::Vector2d x(0.25, -3.0);
  const Eigen::Vector2d dw(0.031, -0.12);
  const Eigen::VectorXd out = nudgepf::integrate_step(model, x, Eigen::VectorXd::Zero(2), 0.01, dw);
  EXPECT_EQ(out, (x + sigma * dw).eval());
}

TEST(IntegrateStep, FrozenCancellingControlLeavesStateOnlyDiffused) {
  Eigen::Matrix2d a;
  a << -0.5, 2.0, -1.0, 0.3;
  const Eigen::Matrix2d sigma = 0.3 * Eigen::Matrix2d::Identity();
  const SdeModel model = nudgepf::make_linear_model(a, sigma);
  const Eigen::Vector2d x(1.7, -0.6);
  const Eigen::Vector2d dw(0.05, 0.02);
  const Eigen::VectorXd u = -model.drift(x);
  const Eigen::VectorXd out = nudgepf::integrate_step(model, x, u, 0.01, dw);
  EXPECT_LT((out - (x + sigma * dw)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(IntegrateStep, NonFiniteResultThrows) {
  const SdeModel model = nudgepf::make_lorenz63();
  const Eigen::Vector3d x(1e200, 1e200, 1e200);
  EXPECT_THROW(nudgepf::integrate_step(model, x, Eigen::VectorXd::Zero(3), 0.01, Eigen::VectorXd::Zero(3)),
               nudgepf::IntegrationError);
}

TEST(IntegratePath, ZeroLengthInterval) {
  const SdeModel model = nudgepf::make_lorenz63();
  const Eigen::Vector3d x0(1.0, 2.0, 3.0);
  const BrownianPath path = nudgepf::generate_brownian_path(3, 0.01, 0, 1);
  const auto traj = nudgepf::integrate_path(model, x0, {}, path, 2.0, 2.0);
  ASSERT_EQ(traj.size(), 1u);
  EXPECT_EQ(traj[0], Eigen::VectorXd(x0));
}

TEST(IntegratePath, DeterministicStarTrajectoryStaysOnAttractor) {
  const SdeModel model = nudgepf::make_lorenz63().deterministic();
  const Eigen::Vector3d x0(1.508870, -1.531271, 25.46091);
  const BrownianPath path = nudgepf::zero_brownian_path(3, 0.01, 350);
  const auto traj = nudgepf::integrate_path(model, x0, {}, path, 0.0, 3.5);
  ASSERT_EQ(traj.size(), 351u);
  for (const auto& x : traj) {
    EXPECT_LT(x.cwiseAbs().maxCoeff(), 100.0);
  }
}

TEST(IntegratePath, EqualSeedsGiveIdenticalTrajectories) {
  const SdeModel model = nudgepf::make_lorenz63();
  const Eigen::Vector3d x0(1.508870, -1.531271, 25.46091);
  const auto p1 = nudgepf::generate_brownian_path(3, 0.01, 100, 99);
  const auto p2 = nudgepf::generate_brownian_path(3, 0.01, 100, 99);
  EXPECT_EQ(nudgepf::integrate_path(model, x0, {}, p1, 0.0, 1.0), nudgepf::integrate_path(model, x0, {}, p2, 0.0, 1.0));
}

TEST(IntegratePath, NoiseFreeReducesToRk4) {
  const SdeModel model = nudgepf::make_lorenz63().deterministic();
  const Eigen::Vector3d x0(-3.622, 2.487, 29.784);
  const auto path = nudgepf::generate_brownian_path(3, 0.01, 80, 3);
  const auto traj = nudgepf::integrate_path(model, x0, {}, path, 0.0, 0.8);
  Eigen::VectorXd x = x0;
  for (int s = 0; s < 80; ++s) {
    x = nudgepf::rk4_step(model, x, Eigen::VectorXd::Zero(3), 0.01);
  }
  EXPECT_EQ(traj.back(), x);
  EXPECT_EQ(nudgepf::deterministic_flow(model, x0, 80, 0.01), x);
}

TEST(IntegratePath, ControlScheduleIsApplied) {
  const SdeModel model = nudgepf::make_linear_model(Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Zero(1, 1));
  const auto path = nudgepf::zero_brownian_path(1, 0.1, 4);
  const std::vector<Eigen::VectorXd> controls = {
      Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, -2.0),
      Eigen::VectorXd::Constant(1, 0.5)};
  const auto traj = nudgepf::integrate_path(model, Eigen::VectorXd::Zero(1), controls, path, 0.0, 0.4);
  EXPECT_NEAR(traj.back()[0], 0.05, 1e-15);
}

// Ornstein-Uhlenbeck dX = a X dt + s dW against its exact solution on a fine shared path.
TEST(IntegratePath, StrongErrorDecreasesWithStepSize) {
  const double a = -1.0;
  const double s = 0.8;
  const double x0 = 1.0;
  const std::size_t fine = 1024;
  const double horizon = 1.0;
  const double fine_dt = horizon / static_cast<double>(fine);
  const SdeModel model =
      nudgepf::make_linear_model(Eigen::MatrixXd::Constant(1, 1, a), Eigen::MatrixXd::Constant(1, 1, s));
  const std::vector<std::size_t> coarsening = {64, 32, 16, 8};
  std::vector<double> sq_error(coarsening.size(), 0.0);
  const int samples = 1000;
  for (int m = 0; m < samples; ++m) {
    const BrownianPath path = nudgepf::generate_brownian_path(1, fine_dt, fine, 1000 + static_cast<std::uint64_t>(m));
    // Exact solution: x0 e^{aT} + s * int e^{a(T - t)} dW, the integral evaluated on the fine grid.
    double exact = x0 * std::exp(a * horizon);
    for (std::size_t k = 0; k < fine; ++k) {
      const double t_mid = (static_cast<double>(k) + 0.5) * fine_dt;
      exact += s * std::exp(a * (horizon - t_mid)) * path.increments[k][0];
    }
    for (std::size_t c = 0; c < coarsening.size(); ++c) {
      BrownianPath coarse;
      coarse.dt = fine_dt * static_cast<double>(coarsening[c]);
      for (std::size_t k = 0; k < fine; k += coarsening[c]) {
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(1);
        for (std::size_t q = 0; q < coarsening[c]; ++q) {
          sum += path.increments[k + q];
        }
        coarse.increments.push_back(sum);
      }
      const auto traj = nudgepf::integrate_path(model, Eigen::VectorXd::Constant(1, x0), {}, coarse, 0.0, horizon);
      const double e = traj.back()[0] - exact;
      sq_error[c] += e * e;
    }
  }
  for (std::size_t c = 1; c < coarsening.size(); ++c) {
    EXPECT_LT(std::sqrt(sq_error[c] / samples), std::sqrt(sq_error[c - 1] / samples)) << "step " << c;
  }
}

}  // namespace

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

#include "nudgepf/sde.hpp"

#include <cmath>
#include <utility>

#include <Eigen/Cholesky>

#include "nudgepf/rng.hpp"

namespace nudgepf {

SdeModel::SdeModel(Drift drift, Jacobian jacobian, Eigen::MatrixXd dispersion)
    : drift_(std::move(drift)),
      jacobian_(std::move(jacobian)),
      dispersion_(std::move(dispersion)),
      diffusion_(dispersion_ * dispersion_.transpose()) {
  if (dispersion_.rows() != dispersion_.cols() || dispersion_.rows() == 0) {
    throw std::invalid_argument("dispersion must be a non-empty square matrix");
  }
}

SdeModel SdeModel::from_diffusion(Drift drift, Jacobian jacobian, const Eigen::MatrixXd& diffusion) {
  if (diffusion.rows() != diffusion.cols() || !diffusion.isApprox(diffusion.transpose(), 1e-12)) {
    throw std::invalid_argument("diffusion must be symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(diffusion);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("diffusion must be positive-definite");
  }
  return SdeModel(std::move(drift), std::move(jacobian), llt.matrixL());
}

SdeModel SdeModel::deterministic() const {
  return SdeModel(drift_, jacobian_, Eigen::MatrixXd::Zero(dimension(), dimension()));
}

Eigen::Vector3d l63_drift(const Eigen::Vector3d& s, const L63Params& p) {
  return {p.alpha * (s[1] - s[0]), p.gamma * s[0] - s[1] - s[0] * s[2], s[0] * s[1] - p.beta * s[2]};
}

Eigen::Matrix3d l63_jacobian(const Eigen::Vector3d& s, const L63Params& p) {
  Eigen::Matrix3d j;
  j << -p.alpha, p.alpha, 0.0,  //
      p.gamma - s[2], -1.0, -s[0],  //
      s[1], s[0], -p.beta;
  return j;
}

Eigen::Matrix3d default_l63_diffusion() {
  Eigen::Matrix3d r;
  r << 2.0, 1.0, 0.5,  //
      1.0, 2.0, 1.0,  //
      0.5, 1.0, 2.0;
  return r;
}

SdeModel make_lorenz63(const L63Params& params, const Eigen::Matrix3d& diffusion) {
  return SdeModel::from_diffusion(
      [params](const Eigen::VectorXd& x) -> Eigen::VectorXd { return l63_drift(x, params); },
      [params](const Eigen::VectorXd& x) -> Eigen::MatrixXd { return l63_jacobian(x, params); },
      diffusion);
}

SdeModel make_linear_model(const Eigen::MatrixXd& a, const Eigen::MatrixXd& dispersion) {
  if (a.rows() != a.cols() || a.rows() != dispersion.rows()) {
    throw std::invalid_argument("linear model dimensions disagree");
  }
  return SdeModel(
      [a](const Eigen::VectorXd& x) -> Eigen::VectorXd { return a * x; },
      [a](const Eigen::VectorXd&) -> Eigen::MatrixXd { return a; },
      dispersion);
}

BrownianPath generate_brownian_path(Eigen::Index dimension, double dt, std::size_t steps, std::uint64_t seed) {
  Engine engine{seed};
  BrownianPath path{dt, {}, seed};
  path.increments.reserve(steps);
  const double scale = std::sqrt(dt);
  for (std::size_t i = 0; i < steps; ++i) {
    path.increments.push_back(scale * standard_normal(engine, dimension));
  }
  return path;
}

BrownianPath zero_brownian_path(Eigen::Index dimension, double dt, std::size_t steps) {
  return BrownianPath{dt, std::vector<Eigen::VectorXd>(steps, Eigen::VectorXd::Zero(dimension)), 0};
}

std::size_t step_count(double t0, double t1, double dt) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("dt must be positive");
  }
  const double ratio = (t1 - t0) / dt;
  const double rounded = std::round(ratio);
  if (rounded < 0.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, std::abs(ratio))) {
    throw std::invalid_argument("interval is not a whole number of integrator steps");
  }
  return static_cast<std::size_t>(rounded);
}

Eigen::VectorXd rk4_step(const SdeModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& u, double dt) {
  const Eigen::VectorXd k1 = model.drift(x) + u;
  const Eigen::VectorXd k2 = model.drift(x + 0.5 * dt * k1) + u;
  const Eigen::VectorXd k3 = model.drift(x + 0.5 * dt * k2) + u;
  const Eigen::VectorXd k4 = model.drift(x + dt * k3) + u;
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Eigen::VectorXd integrate_step(
    const SdeModel& model,
    const Eigen::VectorXd& state,
    const Eigen::VectorXd& control,
    double dt,
    const Eigen::VectorXd& dw) {
  Eigen::VectorXd next = rk4_step(model, state, control, dt) + model.dispersion() * dw;
  if (!next.allFinite()) {
    throw IntegrationError("non-finite state after integrator step");
  }
  return next;
}

std::vector<Eigen::VectorXd> integrate_path(
    const SdeModel& model,
    const Eigen::VectorXd& state0,
    std::span<const Eigen::VectorXd> controls,
    const BrownianPath& path,
    double t0,
    double t1) {
  const std::size_t steps = step_count(t0, t1, path.dt);
  if (path.increments.size() < steps) {
    throw std::invalid_argument("Brownian path shorter than the integration interval");
  }
  if (!controls.empty() && controls.size() < steps) {
    throw std::invalid_argument("control schedule shorter than the integration interval");
  }
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(model.dimension());
  std::vector<Eigen::VectorXd> trajectory;
  trajectory.reserve(steps + 1);
  trajectory.push_back(state0);
  for (std::size_t k = 0; k < steps; ++k) {
    const Eigen::VectorXd& u = controls.empty() ? zero : controls[k];
    trajectory.push_back(integrate_step(model, trajectory.back(), u, path.dt, path.increments[k]));
  }
  return trajectory;
}

Eigen::VectorXd deterministic_flow(const SdeModel& model, const Eigen::VectorXd& state0, std::size_t steps, double dt) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(model.dimension());
  Eigen::VectorXd x = state0;
  for (std::size_t k = 0; k < steps; ++k) {
    x = rk4_step(model, x, zero, dt);
    if (!x.allFinite()) {
      throw IntegrationError("non-finite state in deterministic flow");
    }
  }
  return x;
}

}  // namespace nudgepf

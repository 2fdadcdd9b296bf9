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

#ifndef NUDGEPF_SDE_HPP
#define NUDGEPF_SDE_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace nudgepf {

/// Lorenz-63 parameters.
struct L63Params {
  double alpha = 10.0;
  double gamma = 28.0;
  double beta = 8.0 / 3.0;
};

/// Additive-noise signal process dX = f(X) dt + sigma dW.
///
/// The dispersion sigma is constant; the diffusion matrix R = sigma sigma^T
/// is cached on construction.
class SdeModel {
 public:
  using Drift = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
  using Jacobian = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

  SdeModel(Drift drift, Jacobian jacobian, Eigen::MatrixXd dispersion);

  /// Builds a model whose dispersion is the lower Cholesky factor of `diffusion`.
  /// Throws std::invalid_argument if `diffusion` is not symmetric positive-definite.
  static SdeModel from_diffusion(Drift drift, Jacobian jacobian, const Eigen::MatrixXd& diffusion);

  [[nodiscard]] Eigen::Index dimension() const { return dispersion_.rows(); }
  [[nodiscard]] Eigen::VectorXd drift(const Eigen::VectorXd& x) const { return drift_(x); }
  [[nodiscard]] Eigen::MatrixXd drift_jacobian(const Eigen::VectorXd& x) const { return jacobian_(x); }
  [[nodiscard]] const Eigen::MatrixXd& dispersion() const { return dispersion_; }
  [[nodiscard]] const Eigen::MatrixXd& diffusion() const { return diffusion_; }

  /// Same drift with the noise switched off.
  [[nodiscard]] SdeModel deterministic() const;

 private:
  Drift drift_;
  Jacobian jacobian_;
  Eigen::MatrixXd dispersion_;
  Eigen::MatrixXd diffusion_;
};

Eigen::Vector3d l63_drift(const Eigen::Vector3d& state, const L63Params& params);
Eigen::Matrix3d l63_jacobian(const Eigen::Vector3d& state, const L63Params& params);

/// Diffusion matrix of the stochastic Lorenz-63 testbed.
Eigen::Matrix3d default_l63_diffusion();

SdeModel make_lorenz63(const L63Params& params = {}, const Eigen::Matrix3d& diffusion = default_l63_diffusion());

/// dX = A X dt + dispersion dW.
SdeModel make_linear_model(const Eigen::MatrixXd& a, const Eigen::MatrixXd& dispersion);

/// Sampled Brownian increments on a uniform grid.
struct BrownianPath {
  double dt = 0.0;
  std::vector<Eigen::VectorXd> increments;
  std::uint64_t seed = 0;
};

/// Draws `steps` increments, each N(0, dt I), from the stream identified by `seed`.
BrownianPath generate_brownian_path(Eigen::Index dimension, double dt, std::size_t steps, std::uint64_t seed);

/// All-zero increments, for deterministic propagation.
BrownianPath zero_brownian_path(Eigen::Index dimension, double dt, std::size_t steps);

/// Raised when a step produces a non-finite state.
class IntegrationError : public std::runtime_error {
 public:
  explicit IntegrationError(const std::string& what) : std::runtime_error(what) {}
};

/// Number of dt-steps spanning [t0, t1]. Throws std::invalid_argument unless
/// the interval is a whole number of steps.
std::size_t step_count(double t0, double t1, double dt);

/// Classical RK4 step of the vector field f(x) + control.
Eigen::VectorXd rk4_step(const SdeModel& model, const Eigen::VectorXd& state, const Eigen::VectorXd& control, double dt);

/// One Wiener-RK4-Maruyama step: RK4 on drift plus constant control, then
/// the increment sigma * dW added once.
Eigen::VectorXd integrate_step(
    const SdeModel& model,
    const Eigen::VectorXd& state,
    const Eigen::VectorXd& control,
    double dt,
    const Eigen::VectorXd& dw);

/// Integrates from t0 to t1 on the path's grid.
///
/// `controls` holds one control per step; an empty span means zero control.
/// Returns steps + 1 states including `state0`.
std::vector<Eigen::VectorXd> integrate_path(
    const SdeModel& model,
    const Eigen::VectorXd& state0,
    std::span<const Eigen::VectorXd> controls,
    const BrownianPath& path,
    double t0,
    double t1);

/// Noise-free, uncontrolled flow of `state0` over `steps` RK4 steps.
Eigen::VectorXd deterministic_flow(const SdeModel& model, const Eigen::VectorXd& state0, std::size_t steps, double dt);

}  // namespace nudgepf

#endif  // NUDGEPF_SDE_HPP

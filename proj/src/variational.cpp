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

#include "nudgepf/variational.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace nudgepf {

namespace {

constexpr double kConditionLimit = 1e8;
constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 40;

Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  return x.cwiseMax(lower).cwiseMin(upper);
}

// Zeroes gradient components that point out of the box at an active bound.
Eigen::VectorXd projected_gradient(
    const Eigen::VectorXd& x, const Eigen::VectorXd& g, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  Eigen::VectorXd pg = g;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if ((x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0)) {
      pg[i] = 0.0;
    }
  }
  return pg;
}

}  // namespace

void validate(const VariationalConfig& config) {
  if (!(config.regularization > 0.0) || !(config.bound_sigmas > 0.0) || config.memory < 1 ||
      config.max_iterations < 1 || !(config.gradient_tolerance > 0.0) || !(config.relative_tolerance >= 0.0)) {
    throw std::invalid_argument("invalid variational configuration");
  }
}

Eigen::MatrixXd regularize_covariance(const Eigen::MatrixXd& cov, double eps) {
  const Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
  const double lo = solver.eigenvalues().minCoeff();
  const double hi = solver.eigenvalues().maxCoeff();
  const double condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (condition > kConditionLimit || lo < eps) {
    return sym + eps * Eigen::MatrixXd::Identity(sym.rows(), sym.cols());
  }
  return sym;
}

VariationalProblem make_variational_problem(
    const EnsembleMoments& prior,
    const Eigen::VectorXd& observation,
    const ObservationModel& obs_model,
    const SdeModel& model,
    double t_k,
    double t_next,
    double dt,
    const VariationalConfig& config) {
  validate(config);
  const Eigen::MatrixXd cov = regularize_covariance(prior.covariance, config.regularization);
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("prior covariance is not positive-definite after regularization");
  }
  const Eigen::VectorXd half_width = config.bound_sigmas * cov.diagonal().cwiseSqrt();
  return VariationalProblem{
      prior.mean,
      cov,
      llt.solve(Eigen::MatrixXd::Identity(cov.rows(), cov.cols())),
      observation,
      obs_model,
      model.deterministic(),
      dt,
      step_count(t_k, t_next, dt),
      prior.mean - half_width,
      prior.mean + half_width,
  };
}

double variational_cost(const Eigen::VectorXd& x, const VariationalProblem& problem) {
  const Eigen::VectorXd dx = x - problem.prior_mean;
  Eigen::VectorXd endpoint;
  try {
    endpoint = deterministic_flow(problem.model, x, problem.steps, problem.dt);
  } catch (const IntegrationError&) {
    return kBlowUpCost;
  }
  const Eigen::VectorXd dy = problem.observation - problem.obs_model.observe(endpoint);
  const double cost =
      0.5 * dx.dot(problem.prior_precision * dx) + 0.5 * dy.dot(problem.obs_model.noise_precision() * dy);
  return std::isfinite(cost) ? std::min(cost, kBlowUpCost) : kBlowUpCost;
}

Eigen::VectorXd variational_gradient(const Eigen::VectorXd& x, const VariationalProblem& problem) {
  Eigen::VectorXd grad(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = std::max(1e-6, 1e-8 * std::abs(x[i]));
    probe[i] = x[i] + h;
    const double up = variational_cost(probe, problem);
    probe[i] = x[i] - h;
    const double down = variational_cost(probe, problem);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

std::string to_string(OptimizerStatus status) {
  switch (status) {
    case OptimizerStatus::kGradientTolerance:
      return "gradient_tolerance";
    case OptimizerStatus::kRelativeDecrease:
      return "relative_decrease";
    case OptimizerStatus::kMaxIterations:
      return "max_iterations";
    case OptimizerStatus::kStalled:
      return "stalled";
  }
  return "unknown";
}

OptimizationResult minimize_box(
    const Objective& objective,
    const GradientFn& gradient,
    const Eigen::VectorXd& x_init,
    const Eigen::VectorXd& lower,
    const Eigen::VectorXd& upper,
    const OptimizerOptions& options) {
  if (lower.size() != x_init.size() || upper.size() != x_init.size() || (lower.array() > upper.array()).any()) {
    throw std::invalid_argument("inconsistent box bounds");
  }
  OptimizationResult result;
  Eigen::VectorXd x = project(x_init, lower, upper);
  double f = objective(x);
  Eigen::VectorXd g = gradient(x);
  result.initial_cost = f;
  result.evaluations = 1;

  std::deque<Eigen::VectorXd> s_hist;
  std::deque<Eigen::VectorXd> y_hist;
  const Eigen::Index n = x.size();

  while (true) {
    const Eigen::VectorXd pg = projected_gradient(x, g, lower, upper);
    if (pg.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      result.status = OptimizerStatus::kGradientTolerance;
      break;
    }
    if (result.iterations >= options.max_iterations) {
      result.status = OptimizerStatus::kMaxIterations;
      break;
    }

    // Variables held at a bound by the gradient are excluded from the step.
    Eigen::VectorXd free = Eigen::VectorXd::Ones(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (pg[i] == 0.0) {
        free[i] = 0.0;
      }
    }
    Eigen::VectorXd q = g.cwiseProduct(free);
    std::vector<double> alpha(s_hist.size());
    std::vector<double> rho(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      const Eigen::VectorXd s = s_hist[k].cwiseProduct(free);
      const Eigen::VectorXd y = y_hist[k].cwiseProduct(free);
      const double sy = s.dot(y);
      rho[k] = sy > 0.0 ? 1.0 / sy : 0.0;
      alpha[k] = rho[k] * s.dot(q);
      q -= alpha[k] * y;
    }
    double gamma = 1.0;
    if (!s_hist.empty()) {
      const Eigen::VectorXd s = s_hist.back().cwiseProduct(free);
      const Eigen::VectorXd y = y_hist.back().cwiseProduct(free);
      if (y.squaredNorm() > 0.0 && s.dot(y) > 0.0) {
        gamma = s.dot(y) / y.squaredNorm();
      }
    }
    Eigen::VectorXd r = gamma * q;
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const Eigen::VectorXd s = s_hist[k].cwiseProduct(free);
      const Eigen::VectorXd y = y_hist[k].cwiseProduct(free);
      const double beta = rho[k] * y.dot(r);
      r += s * (alpha[k] - beta);
    }
    Eigen::VectorXd d = -r.cwiseProduct(free);
    double step = 1.0;
    if (g.dot(d) >= 0.0 || !d.allFinite()) {
      d = -pg;
      s_hist.clear();
      y_hist.clear();
    }
    if (s_hist.empty()) {
      step = std::min(1.0, 1.0 / pg.lpNorm<Eigen::Infinity>());
    }

    bool accepted = false;
    Eigen::VectorXd x_trial;
    double f_trial = f;
    for (int b = 0; b < kMaxBacktracks; ++b, step *= 0.5) {
      x_trial = project(x + step * d, lower, upper);
      const Eigen::VectorXd delta = x_trial - x;
      if (delta.squaredNorm() == 0.0) {
        break;
      }
      f_trial = objective(x_trial);
      ++result.evaluations;
      if (f_trial <= f + kArmijo * g.dot(delta)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      result.status = OptimizerStatus::kStalled;
      break;
    }

    const Eigen::VectorXd g_trial = gradient(x_trial);
    const Eigen::VectorXd s = x_trial - x;
    const Eigen::VectorXd y = g_trial - g;
    if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      if (static_cast<int>(s_hist.size()) > options.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
      }
    }
    const double relative = (f - f_trial) / std::max({std::abs(f), std::abs(f_trial), 1.0});
    x = x_trial;
    f = f_trial;
    g = g_trial;
    ++result.iterations;
    if (relative < options.relative_tolerance) {
      result.status = OptimizerStatus::kRelativeDecrease;
      break;
    }
  }
  result.x = x;
  result.cost = f;
  return result;
}

OptimizationResult minimize_cost(
    const VariationalProblem& problem, const Eigen::VectorXd& x_init, const VariationalConfig& config) {
  validate(config);
  OptimizerOptions options{config.memory, config.max_iterations, config.gradient_tolerance, config.relative_tolerance};
  return minimize_box(
      [&problem](const Eigen::VectorXd& x) { return variational_cost(x, problem); },
      [&problem](const Eigen::VectorXd& x) { return variational_gradient(x, problem); },
      x_init,
      problem.lower,
      problem.upper,
      options);
}

PseudoObservationPath build_pseudo_path(
    const Eigen::VectorXd& x_opt,
    const SdeModel& model,
    const ObservationModel& obs_model,
    double t_k,
    double t_next,
    int subintervals,
    double dt) {
  if (subintervals < 1) {
    throw std::invalid_argument("pseudo-observation path needs at least one subinterval");
  }
  const std::size_t steps = step_count(t_k, t_next, dt);
  const auto m = static_cast<std::size_t>(subintervals);
  if (steps % m != 0) {
    throw std::invalid_argument("observation interval must split into whole-step subintervals");
  }
  const std::size_t sub_steps = steps / m;
  PseudoObservationPath path;
  Eigen::VectorXd x = x_opt;
  for (std::size_t j = 0; j <= m; ++j) {
    if (j > 0) {
      x = deterministic_flow(model, x, sub_steps, dt);
    }
    path.times.push_back(j == m ? t_next : t_k + static_cast<double>(j * sub_steps) * dt);
    path.states.push_back(x);
    path.pseudo_observations.push_back(obs_model.observe(x));
  }
  return path;
}

}  // namespace nudgepf

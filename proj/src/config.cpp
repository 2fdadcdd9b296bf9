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

#include "nudgepf/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <yaml-cpp/yaml.h>

namespace nudgepf {

namespace {

using KeySet = std::set<std::string>;

void reject_unknown(const YAML::Node& node, const KeySet& known, const std::string& where) {
  if (!node.IsMap()) {
    throw ConfigError(where.empty() ? "config root must be a mapping" : "'" + where + "' must be a mapping");
  }
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (known.count(key) == 0) {
      throw ConfigError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

template <typename T>
T read(const YAML::Node& node, const std::string& key) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("invalid value for '" + key + "'");
  }
}

Eigen::VectorXd read_vector(const YAML::Node& node, const std::string& key) {
  if (!node.IsSequence()) {
    throw ConfigError("'" + key + "' must be a list of numbers");
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(node.size()));
  for (std::size_t i = 0; i < node.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = read<double>(node[i], key);
  }
  return v;
}

Eigen::MatrixXd read_matrix(const YAML::Node& node, const std::string& key) {
  if (!node.IsSequence() || node.size() == 0) {
    throw ConfigError("'" + key + "' must be a list of rows");
  }
  const std::size_t rows = node.size();
  const std::size_t cols = node[0].IsSequence() ? node[0].size() : 0;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!node[r].IsSequence() || node[r].size() != cols) {
      throw ConfigError("'" + key + "' rows must have equal length");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = read<double>(node[r][c], key);
    }
  }
  return m;
}

FilterKind read_filter(const YAML::Node& node, const std::string& key) {
  try {
    return parse_filter_kind(read<std::string>(node, key));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(e.what()) + " in '" + key + "'");
  }
}

void parse_into(ExperimentConfig& cfg, const YAML::Node& root) {
  if (!root || root.IsNull()) {
    return;
  }
  reject_unknown(root,
                 {"filter", "filters", "seed", "particles", "dt", "obs_interval", "final_time", "truth_initial",
                  "ensemble", "model", "observation", "resampling", "nudging", "variational"},
                 "");
  if (auto n = root["filter"]) cfg.filter = read_filter(n, "filter");
  if (auto n = root["filters"]) {
    if (!n.IsSequence() || n.size() == 0) {
      throw ConfigError("'filters' must be a non-empty list");
    }
    cfg.filters.clear();
    for (const auto& item : n) {
      cfg.filters.push_back(read_filter(item, "filters"));
    }
  }
  if (auto n = root["seed"]) cfg.seed = read<std::uint64_t>(n, "seed");
  if (auto n = root["particles"]) cfg.particles = read<int>(n, "particles");
  if (auto n = root["dt"]) cfg.dt = read<double>(n, "dt");
  if (auto n = root["obs_interval"]) cfg.obs_interval = read<double>(n, "obs_interval");
  if (auto n = root["final_time"]) cfg.final_time = read<double>(n, "final_time");
  if (auto n = root["truth_initial"]) cfg.truth_initial = read_vector(n, "truth_initial");

  if (auto e = root["ensemble"]) {
    reject_unknown(e, {"mean", "variance"}, "ensemble");
    if (auto n = e["mean"]) cfg.ensemble_mean = read_vector(n, "ensemble.mean");
    if (auto n = e["variance"]) cfg.ensemble_variance = read<double>(n, "ensemble.variance");
  }
  if (auto m = root["model"]) {
    reject_unknown(m, {"alpha", "gamma", "beta", "diffusion"}, "model");
    if (auto n = m["alpha"]) cfg.l63.alpha = read<double>(n, "model.alpha");
    if (auto n = m["gamma"]) cfg.l63.gamma = read<double>(n, "model.gamma");
    if (auto n = m["beta"]) cfg.l63.beta = read<double>(n, "model.beta");
    if (auto n = m["diffusion"]) cfg.diffusion = read_matrix(n, "model.diffusion");
  }
  if (auto o = root["observation"]) {
    reject_unknown(o, {"operator", "noise_covariance", "noise_variance"}, "observation");
    if (auto n = o["operator"]) cfg.obs_operator = read_matrix(n, "observation.operator");
    if (o["noise_covariance"] && o["noise_variance"]) {
      throw ConfigError("give either observation.noise_covariance or observation.noise_variance");
    }
    if (auto n = o["noise_covariance"]) cfg.obs_noise_covariance = read_matrix(n, "observation.noise_covariance");
    if (auto n = o["noise_variance"]) {
      const auto d = cfg.obs_operator.rows();
      cfg.obs_noise_covariance = read<double>(n, "observation.noise_variance") * Eigen::MatrixXd::Identity(d, d);
    }
  }
  if (auto r = root["resampling"]) {
    reject_unknown(r, {"enabled", "threshold"}, "resampling");
    if (auto n = r["enabled"]) cfg.resampling.enabled = read<bool>(n, "resampling.enabled");
    if (auto n = r["threshold"]) cfg.resampling.threshold = read<double>(n, "resampling.threshold");
  }
  if (auto u = root["nudging"]) {
    reject_unknown(u, {"subintervals", "batch_size", "tolerance", "max_batches", "rollback_log_threshold"}, "nudging");
    if (auto n = u["subintervals"]) cfg.nudging.subintervals = read<int>(n, "nudging.subintervals");
    if (auto n = u["batch_size"]) cfg.nudging.batch_size = read<int>(n, "nudging.batch_size");
    if (auto n = u["tolerance"]) cfg.nudging.tolerance = read<double>(n, "nudging.tolerance");
    if (auto n = u["max_batches"]) cfg.nudging.max_batches = read<int>(n, "nudging.max_batches");
    if (auto n = u["rollback_log_threshold"]) {
      cfg.nudging.rollback_log_threshold = read<double>(n, "nudging.rollback_log_threshold");
    }
  }
  if (auto v = root["variational"]) {
    reject_unknown(v,
                   {"regularization", "bound_sigmas", "memory", "max_iterations", "gradient_tolerance",
                    "relative_tolerance", "resolve_per_subinterval", "reweight_against_pseudo"},
                   "variational");
    auto& var = cfg.variational;
    if (auto n = v["regularization"]) var.regularization = read<double>(n, "variational.regularization");
    if (auto n = v["bound_sigmas"]) var.bound_sigmas = read<double>(n, "variational.bound_sigmas");
    if (auto n = v["memory"]) var.memory = read<int>(n, "variational.memory");
    if (auto n = v["max_iterations"]) var.max_iterations = read<int>(n, "variational.max_iterations");
    if (auto n = v["gradient_tolerance"]) var.gradient_tolerance = read<double>(n, "variational.gradient_tolerance");
    if (auto n = v["relative_tolerance"]) var.relative_tolerance = read<double>(n, "variational.relative_tolerance");
    if (auto n = v["resolve_per_subinterval"]) {
      var.resolve_per_subinterval = read<bool>(n, "variational.resolve_per_subinterval");
    }
    if (auto n = v["reweight_against_pseudo"]) {
      var.reweight_against_pseudo = read<bool>(n, "variational.reweight_against_pseudo");
    }
  }
}

bool whole_multiple(double numerator, double denominator) {
  const double ratio = numerator / denominator;
  return ratio >= 1.0 - 1e-9 && std::abs(ratio - std::round(ratio)) <= 1e-9 * std::max(1.0, ratio);
}

void emit_matrix(YAML::Emitter& out, const Eigen::MatrixXd& m) {
  out << YAML::BeginSeq;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << YAML::Flow << YAML::BeginSeq;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      out << m(r, c);
    }
    out << YAML::EndSeq;
  }
  out << YAML::EndSeq;
}

void emit_vector(YAML::Emitter& out, const Eigen::VectorXd& v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (const double x : v) {
    out << x;
  }
  out << YAML::EndSeq;
}

}  // namespace

std::string to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::kPf:
      return "pf";
    case FilterKind::kNpf:
      return "npf";
    case FilterKind::kVarNpf:
      return "var_npf";
  }
  return "unknown";
}

FilterKind parse_filter_kind(std::string_view name) {
  if (name == "pf") return FilterKind::kPf;
  if (name == "npf") return FilterKind::kNpf;
  if (name == "var_npf" || name == "var-npf") return FilterKind::kVarNpf;
  throw std::invalid_argument("unknown filter '" + std::string(name) + "'");
}

std::uint64_t filter_tag(FilterKind kind) {
  switch (kind) {
    case FilterKind::kPf:
      return 101;
    case FilterKind::kNpf:
      return 102;
    case FilterKind::kVarNpf:
      return 103;
  }
  return 0;
}

Eigen::Vector3d default_initial_state() { return {1.508870, -1.531271, 25.46091}; }

std::size_t ExperimentConfig::observation_count() const {
  return static_cast<std::size_t>(std::llround(final_time / obs_interval));
}

std::size_t ExperimentConfig::steps_per_observation() const {
  return static_cast<std::size_t>(std::llround(obs_interval / dt));
}

std::size_t ExperimentConfig::total_steps() const { return observation_count() * steps_per_observation(); }

void validate(const ExperimentConfig& cfg) {
  if (cfg.particles < 1) throw ConfigError("particles must be at least 1");
  if (!(cfg.dt > 0.0) || !(cfg.obs_interval > 0.0) || !(cfg.final_time > 0.0)) {
    throw ConfigError("dt, obs_interval and final_time must be positive");
  }
  if (!whole_multiple(cfg.obs_interval, cfg.dt)) throw ConfigError("obs_interval must be a whole number of dt steps");
  if (!whole_multiple(cfg.final_time, cfg.obs_interval)) {
    throw ConfigError("final_time must be a whole number of observation intervals");
  }
  if (cfg.filters.empty()) throw ConfigError("filters must not be empty");
  if (cfg.truth_initial.size() != 3 || cfg.ensemble_mean.size() != 3) {
    throw ConfigError("truth_initial and ensemble.mean must have 3 components");
  }
  if (cfg.diffusion.rows() != 3 || cfg.diffusion.cols() != 3) throw ConfigError("model.diffusion must be 3x3");
  if (!(cfg.ensemble_variance >= 0.0)) throw ConfigError("ensemble.variance must be nonnegative");
  if (cfg.obs_operator.cols() != 3 || cfg.obs_operator.rows() < 1) {
    throw ConfigError("observation.operator must have 3 columns");
  }
  const auto d = cfg.obs_operator.rows();
  if (cfg.obs_noise_covariance.rows() != d || cfg.obs_noise_covariance.cols() != d ||
      !cfg.obs_noise_covariance.isApprox(cfg.obs_noise_covariance.transpose())) {
    throw ConfigError("observation.noise_covariance must be symmetric and match the operator rows");
  }
  if (d > 0 && Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cfg.obs_noise_covariance).eigenvalues().minCoeff() <
                   -1e-12) {
    throw ConfigError("observation.noise_covariance must be positive semidefinite");
  }
  if (!(cfg.resampling.threshold > 0.0 && cfg.resampling.threshold <= 1.0)) {
    throw ConfigError("resampling.threshold must lie in (0, 1]");
  }
  try {
    validate(cfg.nudging);
    validate(cfg.variational);
    build_model(cfg);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.steps_per_observation() % static_cast<std::size_t>(cfg.nudging.subintervals) != 0) {
    throw ConfigError("nudging.subintervals must divide the steps per observation interval");
  }
}

ExperimentConfig parse_config(std::string_view yaml_text) {
  ExperimentConfig cfg;
  try {
    parse_into(cfg, YAML::Load(std::string(yaml_text)));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file " + path.string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

void apply_override(ExperimentConfig& cfg, std::string_view dotted_key, std::string_view yaml_value) {
  if (dotted_key.empty()) {
    throw ConfigError("empty config key");
  }
  YAML::Node value;
  try {
    value = YAML::Load(std::string(yaml_value));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed value: ") + e.what());
  }
  // Wrap the value in nested maps following the dotted key.
  std::vector<std::string> parts;
  std::string key(dotted_key);
  for (std::size_t start = 0;;) {
    const auto dot = key.find('.', start);
    parts.push_back(key.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  YAML::Node node = value;
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    YAML::Node parent(YAML::NodeType::Map);
    parent[*it] = node;
    node = parent;
  }
  ExperimentConfig updated = cfg;
  try {
    parse_into(updated, node);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("invalid override: ") + e.what());
  }
  validate(updated);
  cfg = updated;
}

std::string dump_config(const ExperimentConfig& cfg) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "filter" << YAML::Value << to_string(cfg.filter);
  out << YAML::Key << "filters" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const auto f : cfg.filters) out << to_string(f);
  out << YAML::EndSeq;
  out << YAML::Key << "seed" << YAML::Value << cfg.seed;
  out << YAML::Key << "particles" << YAML::Value << cfg.particles;
  out << YAML::Key << "dt" << YAML::Value << cfg.dt;
  out << YAML::Key << "obs_interval" << YAML::Value << cfg.obs_interval;
  out << YAML::Key << "final_time" << YAML::Value << cfg.final_time;
  out << YAML::Key << "truth_initial" << YAML::Value;
  emit_vector(out, cfg.truth_initial);
  out << YAML::Key << "ensemble" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "mean" << YAML::Value;
  emit_vector(out, cfg.ensemble_mean);
  out << YAML::Key << "variance" << YAML::Value << cfg.ensemble_variance << YAML::EndMap;
  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "alpha" << YAML::Value << cfg.l63.alpha;
  out << YAML::Key << "gamma" << YAML::Value << cfg.l63.gamma;
  out << YAML::Key << "beta" << YAML::Value << cfg.l63.beta;
  out << YAML::Key << "diffusion" << YAML::Value;
  emit_matrix(out, cfg.diffusion);
  out << YAML::EndMap;
  out << YAML::Key << "observation" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "operator" << YAML::Value;
  emit_matrix(out, cfg.obs_operator);
  out << YAML::Key << "noise_covariance" << YAML::Value;
  emit_matrix(out, cfg.obs_noise_covariance);
  out << YAML::EndMap;
  out << YAML::Key << "resampling" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "enabled" << YAML::Value << cfg.resampling.enabled;
  out << YAML::Key << "threshold" << YAML::Value << cfg.resampling.threshold << YAML::EndMap;
  out << YAML::Key << "nudging" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "subintervals" << YAML::Value << cfg.nudging.subintervals;
  out << YAML::Key << "batch_size" << YAML::Value << cfg.nudging.batch_size;
  out << YAML::Key << "tolerance" << YAML::Value << cfg.nudging.tolerance;
  out << YAML::Key << "max_batches" << YAML::Value << cfg.nudging.max_batches;
  out << YAML::Key << "rollback_log_threshold" << YAML::Value << cfg.nudging.rollback_log_threshold;
  out << YAML::EndMap;
  const auto& v = cfg.variational;
  out << YAML::Key << "variational" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "regularization" << YAML::Value << v.regularization;
  out << YAML::Key << "bound_sigmas" << YAML::Value << v.bound_sigmas;
  out << YAML::Key << "memory" << YAML::Value << v.memory;
  out << YAML::Key << "max_iterations" << YAML::Value << v.max_iterations;
  out << YAML::Key << "gradient_tolerance" << YAML::Value << v.gradient_tolerance;
  out << YAML::Key << "relative_tolerance" << YAML::Value << v.relative_tolerance;
  out << YAML::Key << "resolve_per_subinterval" << YAML::Value << v.resolve_per_subinterval;
  out << YAML::Key << "reweight_against_pseudo" << YAML::Value << v.reweight_against_pseudo;
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

SdeModel build_model(const ExperimentConfig& cfg) {
  // An all-zero diffusion selects the noise-free system.
  if (cfg.diffusion.rows() == 3 && cfg.diffusion.cols() == 3 && cfg.diffusion.isZero(0.0)) {
    return make_lorenz63(cfg.l63).deterministic();
  }
  return make_lorenz63(cfg.l63, cfg.diffusion);
}

ObservationModel build_observation_model(const ExperimentConfig& cfg) {
  try {
    return ObservationModel(cfg.obs_operator, cfg.obs_noise_covariance);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace nudgepf

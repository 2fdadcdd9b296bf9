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

#ifndef NUDGEPF_RNG_HPP
#define NUDGEPF_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Core>

namespace nudgepf {

/// Engine used for every random stream in the library.
using Engine = std::mt19937_64;

/// Tags separating the independent random streams of an experiment.
enum class StreamTag : std::uint64_t {
  kTruth = 1,
  kObservationNoise = 2,
  kInitialEnsemble = 3,
  kPropagation = 4,
  kRealization = 5,
  kResampling = 6,
};

/// Mixes a sequence of integers into a 64-bit seed.
///
/// The result depends on the order and values of the keys only, so a stream
/// can be addressed by a tuple such as (seed, filter, cycle, particle) and
/// regenerated independently of how the work is scheduled.
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> keys);

inline std::uint64_t tag(StreamTag t) { return static_cast<std::uint64_t>(t); }

/// Fills a vector with independent standard normal draws.
Eigen::VectorXd standard_normal(Engine& engine, Eigen::Index size);

/// Uniform draw in [0, 1).
double uniform01(Engine& engine);

}  // namespace nudgepf

#endif  // NUDGEPF_RNG_HPP

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

#include "nudgepf/rng.hpp"

namespace nudgepf {

namespace {

// splitmix64 finalizer.
std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::initializer_list<std::uint64_t> keys) {
  std::uint64_t state = 0x6a09e667f3bcc909ULL;
  for (const auto key : keys) {
    state = mix(state ^ mix(key));
  }
  return state;
}

Eigen::VectorXd standard_normal(Engine& engine, Eigen::Index size) {
  std::normal_distribution<double> normal{0.0, 1.0};
  Eigen::VectorXd out(size);
  for (Eigen::Index i = 0; i < size; ++i) {
    out[i] = normal(engine);
  }
  return out;
}

double uniform01(Engine& engine) {
  return std::uniform_real_distribution<double>{0.0, 1.0}(engine);
}

}  // namespace nudgepf

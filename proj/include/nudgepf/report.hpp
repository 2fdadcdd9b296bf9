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

#ifndef NUDGEPF_REPORT_HPP
#define NUDGEPF_REPORT_HPP

#include <filesystem>
#include <string>

namespace nudgepf {

/// Renders plain-text tables from an output directory. A directory holding
/// summary.csv gives the Monte Carlo tables; a run directory, or a directory of
/// run directories, gives the single-experiment comparison.
/// Throws std::runtime_error when nothing recognizable is found.
std::string render_report(const std::filesystem::path& dir);

}  // namespace nudgepf

#endif  // NUDGEPF_REPORT_HPP

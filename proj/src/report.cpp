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

#include "nudgepf/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "nudgepf/config.hpp"
#include "nudgepf/monte_carlo.hpp"

namespace nudgepf {

namespace {

std::string fixed(double v, int digits = 2) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", digits, v);
  return buffer;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string label(FilterKind kind) {
  switch (kind) {
    case FilterKind::kPf:
      return "PF";
    case FilterKind::kNpf:
      return "nPF";
    case FilterKind::kVarNpf:
      return "Var-nPF";
  }
  return "?";
}

struct RunEntry {
  std::string name;
  nlohmann::json meta;
};

void render_runs(std::ostringstream& out, const std::vector<RunEntry>& runs) {
  out << "Single experiment\n";
  out << pad("", 34);
  for (const auto& r : runs) {
    out << pad(r.name, 14);
  }
  out << '\n';
  auto line = [&](const std::string& title, auto getter) {
    out << title << std::string(title.size() < 34 ? 34 - title.size() : 0, ' ');
    for (const auto& r : runs) {
      out << pad(getter(r.meta), 14);
    }
    out << '\n';
  };
  auto num = [](const nlohmann::json& j, int digits = 2) {
    return j.is_number() ? fixed(j.get<double>(), digits) : std::string("-");
  };
  line("Average RMSE", [&](const auto& m) { return num(m["metrics"]["rmse"]); });
  line("Average nESS", [&](const auto& m) { return num(m["metrics"]["avg_ness"]); });
  line("Average control magnitude", [&](const auto& m) { return num(m["metrics"]["mean_control"]); });
  line("Max control magnitude", [&](const auto& m) { return num(m["metrics"]["max_control"]); });
  line("Average Nudging / BM ratio", [&](const auto& m) { return num(m["metrics"]["mean_ratio"]); });
  line("Max Nudging / BM ratio", [&](const auto& m) { return num(m["metrics"]["max_ratio"]); });
  line("  applied controls only, average", [&](const auto& m) { return num(m["metrics"]["mean_applied_ratio"]); });
  line("Rollback fraction", [&](const auto& m) { return num(m["metrics"]["rollback_fraction"], 3); });
  line("Realization steps", [&](const auto& m) { return std::to_string(m["metrics"]["realization_steps"].template get<long long>()); });
  line("Runtime [s]", [&](const auto& m) { return num(m["runtime"]["filter_seconds"]); });
  line("  variational [s]", [&](const auto& m) { return num(m["runtime"]["variational_seconds"]); });
  line("  nudging [s]", [&](const auto& m) { return num(m["runtime"]["nudging_seconds"]); });
  line("  other [s]", [&](const auto& m) { return num(m["runtime"]["other_seconds"]); });
  line("Failed", [&](const auto& m) { return std::string(m["failed"].template get<bool>() ? "yes" : "no"); });
}

void render_mc(std::ostringstream& out, const std::vector<McSummaryRow>& rows) {
  std::map<std::size_t, std::vector<const McSummaryRow*>> by_ic;
  std::vector<FilterKind> filters;
  for (const auto& r : rows) {
    by_ic[r.ic].push_back(&r);
    if (std::find(filters.begin(), filters.end(), r.filter) == filters.end()) {
      filters.push_back(r.filter);
    }
  }

  out << "Monte Carlo averages per initial condition\n";
  out << pad("IC", 6) << pad("filter", 9) << pad("runs", 6) << pad("failed", 8) << pad("Avg RMSE", 10)
      << pad("Med RMSE", 10) << pad("Avg nESS", 10) << pad("Med nESS", 10) << pad("Avg time", 10)
      << pad("Med ratio", 11) << pad("Var share", 11) << '\n';
  for (const auto& [ic, members] : by_ic) {
    for (const McSummaryRow* r : members) {
      out << pad(r->label, 6) << pad(label(r->filter), 9) << pad(std::to_string(r->runs), 6)
          << pad(std::to_string(r->failures), 8) << pad(fixed(r->avg_rmse), 10) << pad(fixed(r->median_rmse), 10)
          << pad(fixed(r->avg_ness), 10) << pad(fixed(r->median_ness), 10) << pad(fixed(r->avg_runtime), 10)
          << pad(r->filter == FilterKind::kPf ? "-" : fixed(r->median_ratio), 11)
          << pad(r->filter == FilterKind::kVarNpf ? fixed(r->avg_variational_share) : "-", 11) << '\n';
    }
  }

  out << "\nAvg. nESS & Avg. RMSE per initial condition\n";
  out << pad("mu", 30);
  for (const auto f : filters) {
    out << pad(label(f), 16);
  }
  out << '\n';
  std::map<FilterKind, std::pair<double, double>> totals;
  std::map<FilterKind, int> counts;
  for (const auto& [ic, members] : by_ic) {
    const auto& mu = members.front()->mean;
    out << pad(members.front()->label + " (" + fixed(mu[0], 3) + "," + fixed(mu[1], 3) + "," + fixed(mu[2], 3) + ")", 30);
    for (const auto f : filters) {
      const auto it = std::find_if(members.begin(), members.end(), [f](const auto* r) { return r->filter == f; });
      if (it == members.end() || (*it)->runs == 0) {
        out << pad("-", 16);
        continue;
      }
      out << pad(fixed((*it)->avg_ness) + " & " + fixed((*it)->avg_rmse), 16);
      totals[f].first += (*it)->avg_ness;
      totals[f].second += (*it)->avg_rmse;
      counts[f] += 1;
    }
    out << '\n';
  }
  if (by_ic.size() > 1) {
    out << pad("mean over ICs", 30);
    for (const auto f : filters) {
      out << pad(counts[f] ? fixed(totals[f].first / counts[f]) + " & " + fixed(totals[f].second / counts[f]) : "-", 16);
    }
    out << '\n';
  }
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  return nlohmann::json::parse(in);
}

}  // namespace

std::string render_report(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw std::runtime_error(dir.string() + " is not a directory");
  }
  std::ostringstream out;
  if (std::filesystem::exists(dir / "summary.csv")) {
    render_mc(out, read_summary_csv(dir / "summary.csv"));
    return out.str();
  }
  std::vector<RunEntry> runs;
  auto add_run = [&runs](const std::filesystem::path& d, const std::string& name) {
    if (!std::filesystem::exists(d / "meta.json")) {
      return;
    }
    nlohmann::json meta = read_json(d / "meta.json");
    if (meta.value("kind", "") == "run") {
      runs.push_back({name.empty() ? label(parse_filter_kind(meta["filter"].get<std::string>())) : name, meta});
    }
  };
  add_run(dir, "");
  if (runs.empty()) {
    std::vector<std::filesystem::path> subdirs;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.is_directory()) {
        subdirs.push_back(entry.path());
      }
    }
    std::sort(subdirs.begin(), subdirs.end());
    for (const auto& d : subdirs) {
      add_run(d, d.filename().string());
    }
  }
  if (runs.empty()) {
    throw std::runtime_error("no summary.csv or run meta.json found under " + dir.string());
  }
  render_runs(out, runs);
  return out.str();
}

}  // namespace nudgepf

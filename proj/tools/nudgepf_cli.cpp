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

// Command-line driver. Talks to the library through the C API only.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nudgepf/nudgepf.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRun = 2;

int exit_code(nudgepf_status status) {
  switch (status) {
    case NUDGEPF_OK:
      return kExitOk;
    case NUDGEPF_ERR_CONFIG:
    case NUDGEPF_ERR_ARGUMENT:
      return kExitConfig;
    default:
      return kExitRun;
  }
}

int report_error(nudgepf_status status, const std::string& context) {
  std::cerr << "nudgepf: " << context << ": " << nudgepf_last_error() << '\n';
  return exit_code(status);
}

// Loads the config file and applies --set overrides.
nudgepf_status load(const std::string& path, const std::vector<std::string>& overrides, nudgepf_config** config) {
  nudgepf_status status = nudgepf_config_load(path.c_str(), config);
  if (status != NUDGEPF_OK) {
    return status;
  }
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      std::cerr << "nudgepf: --set expects key=value, got '" << item << "'\n";
      return NUDGEPF_ERR_CONFIG;
    }
    status = nudgepf_config_set(*config, item.substr(0, eq).c_str(), item.substr(eq + 1).c_str());
    if (status != NUDGEPF_OK) {
      return status;
    }
  }
  return NUDGEPF_OK;
}

void print_report(const std::string& dir) {
  char* text = nullptr;
  if (nudgepf_report(dir.c_str(), &text) == NUDGEPF_OK) {
    std::cout << text;
    nudgepf_string_free(text);
  }
}

struct RunArgs {
  std::string config;
  std::string filter;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
};

int cmd_run(const RunArgs& args) {
  nudgepf_config* config = nullptr;
  nudgepf_status status = load(args.config, args.overrides, &config);
  if (status == NUDGEPF_OK && !args.filter.empty()) {
    status = nudgepf_config_set(config, "filter", args.filter.c_str());
  }
  if (status == NUDGEPF_OK && args.seed) {
    status = nudgepf_config_set(config, "seed", std::to_string(*args.seed).c_str());
  }
  if (status != NUDGEPF_OK) {
    nudgepf_config_free(config);
    return report_error(status, "config");
  }

  nudgepf_record* record = nullptr;
  const nudgepf_status run_status = nudgepf_run(config, &record);
  nudgepf_config_free(config);
  if (record == nullptr) {
    return report_error(run_status, "run");
  }
  int code = kExitOk;
  if (run_status != NUDGEPF_OK) {
    code = report_error(run_status, "run");
  }
  if (!args.out.empty()) {
    const nudgepf_status write_status = nudgepf_record_write(record, args.out.c_str());
    if (write_status != NUDGEPF_OK) {
      nudgepf_record_free(record);
      return report_error(write_status, "write");
    }
    print_report(args.out);
  } else {
    for (const char* name : {"rmse", "avg_ness", "mean_control", "mean_ratio", "runtime_seconds"}) {
      double value = 0.0;
      nudgepf_record_metric(record, name, &value);
      std::printf("%-16s %.6g\n", name, value);
    }
  }
  nudgepf_record_free(record);
  return code;
}

struct McArgs {
  std::string config;
  std::size_t runs = 1;
  std::string ics = "star";
  unsigned jobs = 1;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  bool quiet = false;
};

void progress(std::size_t done, std::size_t total, void*) {
  std::fprintf(stderr, "\r%zu/%zu", done, total);
  if (done == total) {
    std::fprintf(stderr, "\n");
  }
  std::fflush(stderr);
}

int cmd_mc(const McArgs& args) {
  nudgepf_config* config = nullptr;
  nudgepf_status status = load(args.config, args.overrides, &config);
  if (status != NUDGEPF_OK) {
    nudgepf_config_free(config);
    return report_error(status, "config");
  }
  std::uint64_t seed = 0;
  if (args.seed) {
    seed = *args.seed;
  } else {
    nudgepf_config_seed(config, &seed);
  }
  nudgepf_mc_result* result = nullptr;
  status = nudgepf_mc_run(config, args.ics.c_str(), args.runs, seed, args.jobs, args.quiet ? nullptr : progress,
                          nullptr, &result);
  nudgepf_config_free(config);
  if (status != NUDGEPF_OK) {
    return report_error(status, "mc");
  }
  status = nudgepf_mc_write(result, args.out.c_str());
  std::size_t failures = 0;
  nudgepf_mc_failures(result, &failures);
  nudgepf_mc_free(result);
  if (status != NUDGEPF_OK) {
    return report_error(status, "write");
  }
  print_report(args.out);
  if (failures > 0) {
    std::cerr << "nudgepf: " << failures << " filter run(s) failed; see " << args.out << "/meta.json\n";
    return kExitRun;
  }
  return kExitOk;
}

int cmd_report(const std::string& dir) {
  char* text = nullptr;
  const nudgepf_status status = nudgepf_report(dir.c_str(), &text);
  if (status != NUDGEPF_OK) {
    return report_error(status, "report");
  }
  std::cout << text;
  nudgepf_string_free(text);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nudged particle filters for the stochastic Lorenz-63 system"};
  app.set_version_flag("--version", std::string(nudgepf_version()));
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run one filter on one synthetic truth");
  run->add_option("--config", run_args.config, "YAML config file")->required();
  run->add_option("--filter", run_args.filter, "Filter to run")
      ->check(CLI::IsMember({"pf", "npf", "var-npf", "var_npf"}));
  run->add_option("--seed", run_args.seed, "Master seed");
  run->add_option("--out", run_args.out, "Output directory");
  run->add_option("--set", run_args.overrides, "Override a config key, e.g. nudging.subintervals=7");

  McArgs mc_args;
  auto* mc = app.add_subcommand("mc", "Monte Carlo sweep over initial conditions");
  mc->add_option("--config", mc_args.config, "YAML config file")->required();
  mc->add_option("--runs", mc_args.runs, "Runs per initial condition")->required()->check(CLI::PositiveNumber);
  mc->add_option("--ics", mc_args.ics, "all, star, or a comma list such as star,1,4");
  mc->add_option("--jobs", mc_args.jobs, "Worker threads")->check(CLI::PositiveNumber);
  mc->add_option("--out", mc_args.out, "Output directory")->required();
  mc->add_option("--seed", mc_args.seed, "Base seed (defaults to the config seed)");
  mc->add_option("--set", mc_args.overrides, "Override a config key");
  mc->add_flag("--quiet", mc_args.quiet, "No progress output");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Print summary tables for an output directory");
  report->add_option("--in", report_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (run->parsed()) {
    return cmd_run(run_args);
  }
  if (mc->parsed()) {
    return cmd_mc(mc_args);
  }
  return cmd_report(report_dir);
}

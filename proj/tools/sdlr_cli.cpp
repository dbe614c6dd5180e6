// Copyright 2026 The sdlr Authors
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


#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "sdlr/error.hpp"
#include "sdlr/experiment.hpp"

namespace {

enum ExitCode : int { kOk = 0, kRuntimeFailure = 1, kConfigFailure = 2 };

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<long long> samples;
};

sdlr::ExperimentConfig load(const std::string& file, const Overrides& o) {
  sdlr::ExperimentConfig c = sdlr::load_config(file);
  if (o.seed) c.seed = *o.seed;
  if (o.output_dir) c.output_dir = *o.output_dir;
  if (o.samples) {
    if (*o.samples < 1) throw sdlr::ConfigError("--samples", "must be at least 1");
    c.samples = static_cast<sdlr::Index>(*o.samples);
  }
  sdlr::validate(c);
  return c;
}

int run(const std::string& file, const Overrides& o) {
  const sdlr::ExperimentConfig c = load(file, o);
  const sdlr::ExperimentResult result = sdlr::run_experiment(c);
  sdlr::write_experiment(result, c.output_dir);
  int failed = 0;
  for (const auto& r : result.runs) {
    if (r.error) {
      std::cerr << "error: " << r.label << ": " << *r.error << '\n';
      ++failed;
    } else if (!r.records.empty()) {
      const auto& last = r.records.back();
      std::printf("%-18s t=%-8.4g rel_err_mean=%-12.6g rel_err_second=%-12.6g\n",
                  r.label.c_str(), last.t, last.rel_err_mean, last.rel_err_second);
    }
  }
  std::printf("wrote %zu file(s) to %s\n", result.runs.size() + 1, c.output_dir.c_str());
  return failed == 0 ? kOk : kRuntimeFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic dynamical low-rank approximation experiments"};
  app.require_subcommand(1);

  Overrides o;
  std::string config_path;

  auto add_overrides = [&](CLI::App* cmd) {
    cmd->add_option("config", config_path, "experiment configuration (JSON)")->required();
    cmd->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { o.seed = v; },
                                            "override the random seed");
    cmd->add_option_function<std::string>("--output-dir",
                                          [&](const std::string& v) { o.output_dir = v; },
                                          "override the output directory");
    cmd->add_option_function<long long>("--samples", [&](const long long& v) { o.samples = v; },
                                        "override the ensemble size");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "run an experiment and write CSV output");
  add_overrides(run_cmd);
  CLI::App* validate_cmd = app.add_subcommand("validate", "check a configuration file");
  add_overrides(validate_cmd);
  CLI::App* list_cmd = app.add_subcommand("list-experiments", "list built-in experiments");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigFailure;
  }

  try {
    if (list_cmd->parsed()) {
      for (const auto& info : sdlr::list_experiments()) {
        std::printf("%-14s %s\n", info.name, info.description);
      }
      return kOk;
    }
    if (validate_cmd->parsed()) {
      const sdlr::ExperimentConfig c = load(config_path, o);
      std::cout << sdlr::to_json(c).dump(2) << '\n';
      return kOk;
    }
    if (run_cmd->parsed()) return run(config_path, o);
  } catch (const sdlr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kOk;
}

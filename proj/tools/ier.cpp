// Copyright 2026 The ier Authors.
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

#include "ier/cli.hpp"
#include "ier/experiment.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

namespace {

struct Args {
  std::string config;
  std::string out = "run";
  std::optional<std::uint64_t> seed;
  std::string stage;
  std::string sweep = "filters";
  std::string checkpoint;
  ier::Index limit = 8;
  bool verbose = false;
};

void add_common(CLI::App* cmd, Args& args) {
  cmd->add_option("--config", args.config, "Flat JSON config file")->required();
  cmd->add_option("--out", args.out, "Run directory")->capture_default_str();
  cmd->add_option("--seed", args.seed, "Override the config seed");
  cmd->add_flag("-v,--verbose", args.verbose, "Log per-epoch progress");
}

int run(const std::string& command, const Args& args) {
  ier::ExperimentConfig config = ier::load_config(args.config);
  if (args.seed) config.seed = *args.seed;
  config.validate();
  const ier::cli::RunDir dir{args.out};
  const std::optional<std::filesystem::path> ckpt =
      args.checkpoint.empty() ? std::nullopt : std::optional<std::filesystem::path>(args.checkpoint);

  if (command == "synth") {
    ier::cli::cmd_synth(config, dir);
    std::printf("dataset written to %s\n", dir.data().c_str());
  } else if (command == "train") {
    const auto stage = ier::cli::parse_stage(args.stage);
    ier::cli::cmd_train(config, dir, stage);
    std::printf("checkpoint written to %s\n", dir.checkpoint(stage).c_str());
  } else if (command == "eval") {
    const auto ev = ier::cli::cmd_eval(config, dir, ckpt);
    std::fputs(ier::io::report_json(ev.report).c_str(), stdout);
  } else if (command == "ablate") {
    const auto rows = ier::cli::cmd_ablate(config, dir, ier::cli::parse_sweep(args.sweep));
    std::fputs(ier::cli::ablation_csv(rows).c_str(), stdout);
  } else if (command == "export-maps") {
    const auto n = ier::cli::cmd_export_maps(config, dir, ckpt, args.limit);
    std::printf("%ld maps written to %s\n", static_cast<long>(n), dir.maps().c_str());
  }
  return ier::cli::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interference eraser: class-aware sound localization on a synthetic world"};
  app.require_subcommand(1);
  Args args;

  auto* synth = app.add_subcommand("synth", "Generate the synthetic dataset");
  add_common(synth, args);

  auto* train = app.add_subcommand("train", "Train one stage");
  add_common(train, args);
  train->add_option("--stage", args.stage, "1, identifier or 2")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval, args);
  eval->add_option("--checkpoint", args.checkpoint, "Checkpoint (default: latest stage in the run directory)");

  auto* ablate = app.add_subcommand("ablate", "Retrain stage 2 under toggle settings and compare");
  add_common(ablate, args);
  ablate->add_option("--sweep", args.sweep, "filters, threshold or identifier")->capture_default_str();

  auto* maps = app.add_subcommand("export-maps", "Write AV maps as raw tensors and PGM previews");
  add_common(maps, args);
  maps->add_option("--checkpoint", args.checkpoint, "Checkpoint (default: latest stage in the run directory)");
  maps->add_option("--limit", args.limit, "Number of test scenes to export")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return ier::cli::kExitUsage;
  }

  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(args.verbose ? spdlog::level::info : spdlog::level::warn);
  try {
    return run(app.get_subcommands().front()->get_name(), args);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "ier: %s\n", e.what());
    return ier::cli::exit_code(e);
  }
}

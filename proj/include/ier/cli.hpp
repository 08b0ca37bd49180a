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

#ifndef IER_CLI_HPP
#define IER_CLI_HPP

#include "ier/experiment.hpp"
#include "ier/io.hpp"

#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ier::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumeric = 4;

/// Maps an exception thrown by a command to the process exit code.
int exit_code(const std::exception& e);

/// File layout of one run directory.
struct RunDir {
  std::filesystem::path root;

  [[nodiscard]] std::filesystem::path data() const { return root / "data"; }
  [[nodiscard]] std::filesystem::path checkpoint(io::Stage stage) const;
  [[nodiscard]] std::filesystem::path log(io::Stage stage) const;
  [[nodiscard]] std::filesystem::path report() const { return root / "report.json"; }
  [[nodiscard]] std::filesystem::path diagnostics() const { return root / "diagnostics.json"; }
  [[nodiscard]] std::filesystem::path per_sample() const { return root / "per_sample.csv"; }
  [[nodiscard]] std::filesystem::path ablation() const { return root / "ablation.csv"; }
  [[nodiscard]] std::filesystem::path maps() const { return root / "maps"; }
};

/// "1", "identifier" or "2".
io::Stage parse_stage(const std::string& text);
std::string stage_name(io::Stage stage);

/// Dataset in the run directory; throws UsageError when its dimensions do not
/// match the config.
Dataset load_run_dataset(const ExperimentConfig& config, const RunDir& run);

/// Checkpoint at `path`; throws UsageError when missing or shaped differently
/// from the config.
io::Checkpoint load_run_checkpoint(const ExperimentConfig& config, const std::filesystem::path& path);

/// Latest stage checkpoint present in the run directory.
std::filesystem::path latest_checkpoint(const RunDir& run);

void cmd_synth(const ExperimentConfig& config, const RunDir& run);

/// Trains one stage from the previous stage's checkpoint and writes the new
/// checkpoint plus an (epoch, loss, p, m) CSV log.
io::Checkpoint cmd_train(const ExperimentConfig& config, const RunDir& run, io::Stage stage);

/// Writes report.json, diagnostics.json and per_sample.csv.
Evaluation cmd_eval(const ExperimentConfig& config, const RunDir& run,
                    const std::optional<std::filesystem::path>& checkpoint = std::nullopt);

enum class Sweep { kFilters, kThreshold, kIdentifier };

Sweep parse_sweep(const std::string& text);

struct AblationRow {
  ReferrerToggles toggles;
  metrics::MetricsReport report;
  Diagnostics diagnostics;
};

/// Retrains stage 2 from the identifier checkpoint under each toggle setting of
/// the sweep and evaluates it. Writes ablation.csv.
std::vector<AblationRow> cmd_ablate(const ExperimentConfig& config, const RunDir& run, Sweep sweep);

std::string ablation_csv(const std::vector<AblationRow>& rows);

/// Per test scene (first `limit` of the unconstrained split) and class: raw
/// tensor plus PGM preview of the AV map. Returns the number of maps written.
Index cmd_export_maps(const ExperimentConfig& config, const RunDir& run,
                      const std::optional<std::filesystem::path>& checkpoint, Index limit);

}  // namespace ier::cli

#endif  // IER_CLI_HPP

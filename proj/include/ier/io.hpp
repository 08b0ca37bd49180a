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


#ifndef IER_IO_HPP
#define IER_IO_HPP

#include "ier/core.hpp"
#include "ier/experiment.hpp"
#include "ier/referrer.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ier::io {

/// Raw tensor: "IERT", u32 rank, u32 dims..., float32 little-endian row-major.
struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

void write_tensor(const std::string& path, const Tensor& t);
Tensor read_tensor(const std::string& path);

/// Row-major float32 view of a matrix.
Tensor to_tensor(const Mat& m);

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class Stage : std::uint32_t { kStage1 = 1, kIdentifier = 2, kStage2 = 3 };

struct Checkpoint {
  std::uint64_t config_hash = 0;
  Stage stage = Stage::kStage1;
  Model model;
};

/// "IER1", u32 version, u64 config hash, u32 stage, u32 tensor count, then per
/// tensor: u32 name length, name, u32 rows, u32 cols, float64 row-major.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Writes manifest.json plus one visual and one audio tensor per split.
void write_dataset(const std::string& dir, const ExperimentConfig& config, const Dataset& data);
Dataset read_dataset(const std::string& dir);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

/// 8-bit binary PGM with values mapped linearly from [-1, 1] to [0, 255].
void write_pgm(const std::string& path, const SimilarityMap& map);
std::uint8_t pgm_level(double value);

std::string report_json(const metrics::MetricsReport& report);

}  // namespace ier::io

#endif  // IER_IO_HPP

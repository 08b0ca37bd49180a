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


#ifndef IER_EXPERIMENT_HPP
#define IER_EXPERIMENT_HPP

#include "ier/core.hpp"
#include "ier/metrics.hpp"
#include "ier/referrer.hpp"
#include "ier/synthetic_world.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace ier {

struct ExperimentConfig {
  std::uint64_t seed = 0;

  // world
  Index k_true = 11;
  Index grid_h = 14;
  Index grid_w = 14;
  Index c_in = 64;
  Index a_in = 64;
  double sigma = 0.1;
  double test_sigma = 0.0;
  double volume_ratio_max = 10.0;
  Index box_min = 3;
  Index box_max = 6;
  Index sounding = 2;
  Index silent = 2;
  Index offscreen = 1;
  Index n_single = 400;
  Index n_unconstrained = 200;
  Index n_test_single = 100;
  Index n_test_unconstrained = 100;

  // model
  Index c = 128;
  Index c_m = 128;
  Index k = 0;  // 0 selects 2 * k_true + 3

  // training
  Index batch = 32;
  int stage1_epochs = 30;
  double stage1_lr = 1e-2;
  int stage1_warmup = 5;
  int identifier_epochs = 30;
  double identifier_lr = 1e-3;
  bool identifier_train_audio = false;
  int stage2_epochs = 30;
  double stage2_lr = 1e-3;

  // referrer
  int threshold_mode = 5;
  double threshold_constant = 0.5;
  double threshold_ratio = 0.5;

  // metrics
  double zeta = 0.5;
  double iou_binarize_ratio = 0.5;

  [[nodiscard]] Index clusters() const { return k > 0 ? k : 2 * k_true + 3; }
  [[nodiscard]] world::WorldConfig world(double noise) const;
  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

/// Parses a flat JSON object; unknown keys and wrong types are rejected.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& config);
/// FNV-1a over the canonical JSON form.
std::uint64_t config_hash(const ExperimentConfig& config);

struct Dataset {
  world::ClassTable table;
  std::vector<world::ScenePair> train_single;
  std::vector<world::ScenePair> train_unconstrained;
  std::vector<world::ScenePair> test_single;
  std::vector<world::ScenePair> test_unconstrained;
};

Dataset synthesize_dataset(const ExperimentConfig& config);

using EpochCallback = std::function<void(const EpochLog&)>;

/// Stage-1 encoders followed by prototype construction.
Model run_stage1(const ExperimentConfig& config, const Dataset& data, const EpochCallback& on_epoch = {});
Model run_identifier(const ExperimentConfig& config, const Model& model, const Dataset& data,
                     const EpochCallback& on_epoch = {});
Model run_stage2(const ExperimentConfig& config, const Model& model, const Dataset& data,
                 const ReferrerToggles& toggles, const EpochCallback& on_epoch = {});

ReferrerToggles default_toggles(const ExperimentConfig& config);

struct SceneScore {
  std::string split;
  Index id = 0;
  double ciou = 0.0;
  Vec iou;  // per true category, NaN where absent
};

/// Quantities beyond the report used by the acceptance checks.
struct Diagnostics {
  double silent_gap = 0.0;    // mean GAP of category AV maps, silent on-screen classes
  double sounding_gap = 0.0;  // same for sounding classes
  Index offscreen_scenes = 0;
  Index offscreen_suppressed = 0;   // scenes where mean p^av(off-screen) < mean p^av(sounding)
  Index masked_classes = 0;         // classes with an all-zero mask
  Index masked_nonzero_scores = 0;  // ... whose normalized score is not exactly 0
  double recall_no_identifier = 0.0;
  double precision_no_identifier = 0.0;
};

struct Evaluation {
  metrics::MetricsReport report;
  Diagnostics diagnostics;
  std::vector<SceneScore> scenes;
  std::vector<Index> categories;  // cluster -> true category
};

Evaluation evaluate(const ExperimentConfig& config, const Model& model, const Dataset& data,
                    const ReferrerToggles& toggles);

/// Category map: elementwise max of the AV maps of the clusters mapped to it.
SimilarityMap category_map(const ClassMaps& av, const std::vector<Index>& categories, Index category);

/// Per-category score: max over mapped clusters, 0 when none maps there.
Vec category_scores(const Vec& cluster_scores, const std::vector<Index>& categories, Index k_true);

}  // namespace ier

#endif  // IER_EXPERIMENT_HPP

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

#ifndef IER_SYNTHETIC_WORLD_HPP
#define IER_SYNTHETIC_WORLD_HPP

#include "ier/core.hpp"
#include "ier/random.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace ier::world {

/// Ground-truth latent appearance and sound per class; rows are unit-norm.
struct ClassTable {
  Mat visual;  // K_true x C_in
  Mat audio;   // K_true x A_in

  [[nodiscard]] Index classes() const { return visual.rows(); }
  [[nodiscard]] Index visual_dim() const { return visual.cols(); }
  [[nodiscard]] Index audio_dim() const { return audio.cols(); }
};

struct SceneObject {
  Index class_id = 0;
  Box box;
  bool sounding = false;
  double volume = 0.0;
};

struct OffscreenSource {
  Index class_id = 0;
  double volume = 0.0;
};

struct SceneSpec {
  std::vector<SceneObject> objects;
  std::vector<OffscreenSource> offscreen;
  double noise = 0.0;
};

struct ScenePair {
  SceneSpec spec;
  FeatureGrid visual;  // C_in channels
  Vec audio;           // unit-norm A_in latent
  Vec labels;          // multi-hot over K_true: on-screen sounding classes

  /// Boxes owned by `class_id` (empty for absent or off-screen classes).
  [[nodiscard]] std::vector<Box> boxes_for(Index class_id) const;
  /// Every class audible in the mixture, on-screen or not, ascending.
  [[nodiscard]] std::vector<Index> audible_classes() const;
  /// Class of the first object; the only one for single-source scenes.
  [[nodiscard]] Index primary_class() const { return spec.objects.front().class_id; }
};

struct WorldConfig {
  Index grid_h = 14;
  Index grid_w = 14;
  double sigma = 0.1;
  double volume_ratio_max = 10.0;
  Index box_min = 3;
  Index box_max = 6;
  Index sounding = 2;
  Index silent = 2;
  Index offscreen = 1;
};

inline constexpr double kMaxLatentCosine = 0.2;
inline constexpr int kClassRejectionRounds = 10000;
inline constexpr int kBoxPlacementTries = 1000;

/// Rejection-samples unit latents with pairwise cosine <= 0.2 per modality.
ClassTable make_class_table(Index k_true, Index c_in, Index a_in, std::uint64_t seed);

struct AudioEntry {
  Vec latent;
  double volume = 1.0;
};

/// unit_norm(sum volume_i * latent_i + N(0, sigma^2)).
Vec mix_audio_latents(std::span<const AudioEntry> entries, double sigma, Rng& rng);

ScenePair synthesize_single_source(const ClassTable& table, const WorldConfig& config, std::uint64_t seed);

/// On-screen sounding + silent objects in disjoint boxes plus off-screen
/// sources mixed into the audio. Volumes are log-uniform in [1/ratio, 1].
ScenePair synthesize_unconstrained(const ClassTable& table, const WorldConfig& config, std::uint64_t seed,
                                   double volume_ratio_max);

}  // namespace ier::world

#endif  // IER_SYNTHETIC_WORLD_HPP

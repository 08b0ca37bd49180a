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


#ifndef IER_REFERRER_HPP
#define IER_REFERRER_HPP

#include "ier/core.hpp"
#include "ier/encoders.hpp"
#include "ier/identifier.hpp"
#include "ier/prototypes.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace ier {

/// K maps over the same H x W grid, stored as an (H*W) x K matrix.
struct ClassMaps {
  Index height = 0;
  Index width = 0;
  Mat values;

  [[nodiscard]] Index classes() const { return values.cols(); }
  [[nodiscard]] SimilarityMap map(Index k) const { return SimilarityMap(height, width, values.col(k)); }
};

/// L^v_k = cos(f^v, P^v_k).
ClassMaps class_visual_maps(const FeatureGrid& visual, const PrototypeBank& visual_bank);

/// cos(f^v, F^a_k) for every class.
ClassMaps audio_conditioned_maps(const FeatureGrid& visual, const Mat& expanded);

/// L^av_k = cos(f^v, F^a_k) * L^v_k.
ClassMaps class_av_maps(const FeatureGrid& visual, const Mat& expanded, const ClassMaps& lv);

/// softmax over per-class GAP.
Vec visual_guided_distribution(const ClassMaps& av);

/// Binarization threshold choices for the off-screen filter.
///   1: constant eps;  2: r * max over the batch;  3: r * max of each map;
///   4: no mask, weights are GAP(L^v);  5: mean over the batch (default).
struct ThresholdOptions {
  int mode = 5;
  double constant = 0.5;
  double ratio = 0.5;
};

/// Batch-level threshold for modes 1, 2 and 5 (modes 3 and 4 return NaN).
double batch_threshold(std::span<const ClassMaps> batch, const ThresholdOptions& options);

/// Mean over every cell of every map of every batch item.
double batch_mean_threshold(std::span<const ClassMaps> batch);

/// m_k = [L^v_k > eps] with strict inequality.
BinaryMask binarize(const SimilarityMap& map, double eps);

/// Per-class mask weight GAP(m_k) (or GAP(L^v_k) in mode 4).
Vec mask_weights(const ClassMaps& lv, double batch_eps, const ThresholdOptions& options);

struct AudioGuided {
  Vec similarity;  // p^a_k = cos(P^a_k, F^a_k)
  Vec scores;      // normalized GAP(m_k) * p^a_k
  Vec distribution;
  bool fallback = false;
};

/// Scores GAP(m_k) * p^a_k normalized by their L1 norm, then softmax. Falls
/// back to softmax(p^a) when every score vanishes.
AudioGuided audio_guided_distribution(const PrototypeBank& audio_bank, const Mat& expanded, const Vec& weights);

/// 0.5 KL(p || q) + 0.5 KL(q || p).
double cross_distillation_loss(const Vec& p, const Vec& q);

struct ReferrerToggles {
  bool silent_filter = true;
  bool offscreen_filter = true;
  bool identifier = true;
  ThresholdOptions threshold;
};

/// Everything that stays fixed after identifier training.
struct Model {
  EncoderParams encoder;
  Prototypes prototypes;
  StepParams steps;

  [[nodiscard]] Index classes() const { return prototypes.visual.size(); }
};

struct Inference {
  ClassMaps visual;  // L^v
  ClassMaps av;      // L^av (equals L^v with the silent filter off)
  Mat expanded;      // F^a
  Vec weights;       // per-class mask weight fed to the off-screen filter
  Vec p_va;
  AudioGuided p_av;
};

/// Forward pass for one scene given the batch threshold (ignored by modes 3, 4).
Inference infer(const Model& model, const world::ScenePair& scene, double batch_eps, const ReferrerToggles& toggles);

/// Inference over a list of scenes; thresholds are taken per batch of `batch` scenes.
std::vector<Inference> infer_all(const Model& model, std::span<const world::ScenePair> scenes, Index batch,
                                 const ReferrerToggles& toggles);

/// L_u for one scene with its mask weights held fixed; accumulates encoder
/// gradients when `grad` is non-null.
double unconstrained_loss(const Model& model, const world::ScenePair& scene, const Vec& weights,
                          const ReferrerToggles& toggles, EncoderParams* grad);

struct Stage2Options {
  int epochs = 30;
  Index batch = 32;
  double lr = 1e-4;
  std::uint64_t seed = 0;
};

struct Stage2Result {
  EncoderParams encoder;
  std::vector<EpochLog> log;
};

/// Minimizes the mean L_u over unconstrained scenes, updating the visual
/// encoder and the audio output projection only.
Stage2Result train_stage2(const Model& model, std::span<const world::ScenePair> data, const Stage2Options& options,
                          const ReferrerToggles& toggles, const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace ier

#endif  // IER_REFERRER_HPP

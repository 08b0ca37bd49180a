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

#ifndef IER_ENCODERS_HPP
#define IER_ENCODERS_HPP

#include "ier/core.hpp"
#include "ier/params.hpp"
#include "ier/synthetic_world.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace ier {

/// Reference encoders: one affine stage for vision, two for audio, each
/// followed by L2 normalization into a shared C-dim embedding.
struct EncoderParams {
  Affine visual;     // C_in -> C
  Affine audio_mid;  // A_in -> C_m
  Affine audio_out;  // C_m -> C

  static EncoderParams random(Index c_in, Index a_in, Index c_m, Index c, std::uint64_t seed);
  static EncoderParams zeros_like(const EncoderParams& p);

  [[nodiscard]] Index embed_dim() const { return visual.out_dim(); }
  [[nodiscard]] Index mid_dim() const { return audio_mid.out_dim(); }

  std::vector<Block> blocks();
  std::vector<Block> visual_blocks();
  std::vector<Block> audio_blocks();
};

struct VisualEncoding {
  FeatureGrid features;  // unit-norm cells
  Vec norms;             // pre-normalization norm per cell
  Index degenerate_cells = 0;
};

struct AudioEncoding {
  Vec feature;  // f^a, unit-norm
  Vec mid;      // f_m
  double norm = 0.0;
};

/// Per-cell affine + L2 norm. Zero-norm cells become the uniform unit vector
/// (counted in `degenerate_cells` and logged).
VisualEncoding encode_visual(const EncoderParams& params, const FeatureGrid& grid);

AudioEncoding encode_audio(const EncoderParams& params, const Vec& latent);

/// Accumulates parameter gradients of the visual encoder given dL/d(features).
void visual_backward(const EncoderParams& params, const FeatureGrid& input, const VisualEncoding& enc,
                     const Mat& grad_features, EncoderParams& grad);

/// Same for a single cell (sparse form used by max pooling).
void visual_cell_backward(const FeatureGrid& input, const VisualEncoding& enc, Index cell, const Vec& grad_feature,
                          EncoderParams& grad);

/// Accumulates audio encoder gradients given dL/df^a and an optional extra dL/df_m.
void audio_backward(const EncoderParams& params, const Vec& latent, const AudioEncoding& enc, const Vec& grad_feature,
                    const Vec* grad_mid, EncoderParams& grad);

/// d cos(a, b) / da.
Vec cosine_grad(const Vec& a, const Vec& b);

/// bce(remap(GMP(localization_map(visual, audio))), delta).
double correspondence_loss(const Vec& audio, const FeatureGrid& visual, double delta);

struct CorrespondenceGrad {
  double loss = 0.0;
  Index cell = 0;     // argmax cell
  Vec grad_audio;     // dL/d audio
  Vec grad_cell;      // dL/d visual cell
};

CorrespondenceGrad correspondence_loss_grad(const Vec& audio, const FeatureGrid& visual, double delta);

/// Average-pooled variant used for warm-up epochs: every cell shares the
/// gradient, so object cells receive signal before they win the max.
struct AveragedCorrespondenceGrad {
  double loss = 0.0;
  Vec grad_audio;
  Mat grad_cells;  // one row per cell
};

AveragedCorrespondenceGrad averaged_correspondence_loss_grad(const Vec& audio, const FeatureGrid& visual,
                                                             double delta);

enum class Pooling { kMax, kAverage };

struct Stage1Options {
  int epochs = 30;
  Index batch = 32;
  double lr = 1e-4;
  int warmup_epochs = 0;  // leading epochs trained with average pooling
  std::uint64_t seed = 0;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double p = 0.0;  // curriculum mix probability (0 outside identifier training)
  int m = 0;       // curriculum mixture order
};

/// Mean correspondence loss over one positive and one in-batch negative per
/// item, with gradients w.r.t. every encoder parameter.
double stage1_batch_loss(const EncoderParams& params, std::span<const world::ScenePair* const> batch,
                         std::span<const Index> negatives, EncoderParams* grad,
                         Pooling pooling = Pooling::kMax);

struct Stage1Result {
  EncoderParams params;
  std::vector<EpochLog> log;
};

Stage1Result train_stage1(EncoderParams params, std::span<const world::ScenePair> data, const Stage1Options& options,
                          const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace ier

#endif  // IER_ENCODERS_HPP

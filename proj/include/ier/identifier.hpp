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


#ifndef IER_IDENTIFIER_HPP
#define IER_IDENTIFIER_HPP

#include "ier/core.hpp"
#include "ier/encoders.hpp"
#include "ier/params.hpp"
#include "ier/prototypes.hpp"
#include "ier/random.hpp"
#include "ier/synthetic_world.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace ier {

/// One affine map C_m -> C per pseudo-class.
struct StepParams {
  std::vector<Affine> steps;

  static StepParams zeros(Index k, Index c, Index c_m);

  [[nodiscard]] Index classes() const { return static_cast<Index>(steps.size()); }
  std::vector<Block> blocks();
};

/// Row n = W_n f_m + b_n.
Mat distinguishing_step(const StepParams& params, const Vec& mid);

/// Row k = f^a + delta_k, not re-normalized.
Mat expand_features(const Vec& audio, const Mat& delta);

/// (1/K) sum_n bce(remap(cos(P^a_n, f^a + delta_n)), y_n); dL/d delta into `grad`.
double mixed_loss(const PrototypeBank& audio_bank, const Vec& audio, const Mat& delta, const Vec& targets,
                  Mat* grad = nullptr);

/// Accumulates W_n, b_n gradients given dL/d delta.
void step_backward(const Vec& mid, const Mat& grad_delta, StepParams& grad);

/// remap(cos(P^a_k, F^a_k)) for every pseudo-class.
Vec class_scores(const PrototypeBank& audio_bank, const Mat& expanded);

struct CurriculumState {
  int epoch = 0;
  double p = 0.5;
  int m = 2;
};

/// p rises linearly 0.5 -> 0.9; m is 2, 3, 4 over successive thirds.
CurriculumState curriculum_schedule(int epoch, int total_epochs);

struct Mixture {
  Vec latent;                  // mixed, unit-norm
  Vec targets;                 // multi-hot over pseudo-classes
  std::vector<Index> members;  // sample indices
};

/// Mixes `first` with m - 1 further samples of pairwise distinct pseudo-classes,
/// volumes log-uniform in [0.1, 1].
Mixture make_mixture(std::span<const Vec> latents, std::span<const Index> labels, Index k, int m, Index first,
                     Rng& rng);

struct IdentifierOptions {
  int epochs = 30;
  Index batch = 32;
  double lr = 1e-4;
  bool train_audio = false;  // also update the audio projection
  std::uint64_t seed = 0;
};

struct IdentifierResult {
  StepParams steps;
  EncoderParams encoder;
  Prototypes prototypes;
  std::vector<EpochLog> log;
};

/// Curriculum training of the distinguishing-steps. Prototypes are recomputed
/// from fresh features at the start of every epoch.
IdentifierResult train_identifier(EncoderParams encoder, StepParams steps, Prototypes prototypes,
                                  std::span<const world::ScenePair> data, const IdentifierOptions& options,
                                  const std::function<void(const EpochLog&)>& on_epoch = {});

/// Object and audio features of single-source samples, one row each.
struct SampleFeatures {
  Mat objects;
  Mat audio;
};

SampleFeatures encode_samples(const EncoderParams& encoder, std::span<const world::ScenePair> data);

}  // namespace ier

#endif  // IER_IDENTIFIER_HPP

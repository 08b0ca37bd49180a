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


#ifndef IER_PROTOTYPES_HPP
#define IER_PROTOTYPES_HPP

#include "ier/core.hpp"

#include <cstdint>
#include <vector>

namespace ier {

enum class Modality { kAudio, kVisual };

/// K unit-norm prototype rows in the shared embedding space.
struct PrototypeBank {
  Modality modality = Modality::kVisual;
  Mat rows;  // K x C

  PrototypeBank() = default;
  PrototypeBank(Modality m, Mat r);

  [[nodiscard]] Index size() const { return rows.rows(); }
  [[nodiscard]] Index dim() const { return rows.cols(); }
};

struct Prototypes {
  PrototypeBank visual;
  PrototypeBank audio;
  std::vector<Index> assignments;  // pseudo-class per single-source sample
};

/// The cell of `visual` most similar to `audio`.
Vec object_feature(const FeatureGrid& visual, const Vec& audio);

/// Clusters visual object features (one per row of `objects`) with k-means and
/// averages the paired audio features per cluster.
Prototypes build_prototypes(const Mat& objects, const Mat& audio, Index k, std::uint64_t seed);

/// Recomputes both banks from fresh features under the frozen assignments.
/// Empty clusters keep their previous rows.
void recompute_prototypes(Prototypes& protos, const Mat& objects, const Mat& audio);

/// (1/K) sum_n bce(remap(cos(P_n, F_n)), y_n) with one candidate feature per
/// prototype row; writes dL/dF when `grad` is non-null.
double prototype_bce(const PrototypeBank& bank, const Mat& features, const Vec& targets, Mat* grad = nullptr);

/// Loss of a single-source clip against its one-hot pseudo-label.
double single_source_loss(const PrototypeBank& audio_bank, const Vec& audio, const Vec& one_hot,
                          Vec* grad = nullptr);

Vec one_hot(Index k, Index size);

}  // namespace ier

#endif  // IER_PROTOTYPES_HPP

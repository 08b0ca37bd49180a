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


#include "ier/prototypes.hpp"

#include "ier/encoders.hpp"
#include "ier/numerics.hpp"

#include <spdlog/spdlog.h>

namespace ier {

namespace {

void check_unit_rows(const Mat& rows) {
  for (Index k = 0; k < rows.rows(); ++k) {
    if (!rows.row(k).allFinite() || std::abs(rows.row(k).norm() - 1.0) > 1e-6)
      throw DomainError("prototype rows must be finite and unit-norm");
  }
}

// Per-cluster sums and counts of the rows of `x`.
std::vector<Index> cluster_sums(const Mat& x, const std::vector<Index>& assignments, Index k, Mat& sums) {
  sums = Mat::Zero(k, x.cols());
  std::vector<Index> counts(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    sums.row(assignments[i]) += x.row(static_cast<Index>(i));
    ++counts[static_cast<std::size_t>(assignments[i])];
  }
  return counts;
}

}  // namespace

PrototypeBank::PrototypeBank(Modality m, Mat r) : modality(m), rows(std::move(r)) {
  if (rows.rows() < 1) throw DomainError("prototype bank needs at least one row");
  check_unit_rows(rows);
}

Vec object_feature(const FeatureGrid& visual, const Vec& audio) {
  return visual.cells.row(argmax_cell(localization_map(visual, audio))).transpose();
}

Prototypes build_prototypes(const Mat& objects, const Mat& audio, Index k, std::uint64_t seed) {
  if (objects.rows() != audio.rows() || objects.cols() != audio.cols())
    throw DomainError("build_prototypes: feature shapes disagree");
  if (k < 1) throw ConfigError("build_prototypes: K must be positive");
  if (objects.rows() < k) throw ConfigError("build_prototypes: fewer samples than clusters");

  ClusterResult clusters = kmeans(objects, k, seed);
  Mat visual = clusters.centroids;
  for (Index r = 0; r < k; ++r) {
    const double n = visual.row(r).norm();
    if (!(n > 0.0)) throw DomainError("build_prototypes: zero visual centroid");
    visual.row(r) /= n;
  }

  Mat sums;
  const auto counts = cluster_sums(audio, clusters.assignments, k, sums);
  Mat audio_rows(k, audio.cols());
  for (Index r = 0; r < k; ++r) {
    const double n = sums.row(r).norm();
    if (counts[static_cast<std::size_t>(r)] == 0 || !(n > 0.0)) {
      spdlog::warn("build_prototypes: cluster {} has no audio support; using its visual direction", r);
      audio_rows.row(r) = visual.row(r);
    } else {
      audio_rows.row(r) = sums.row(r) / n;
    }
  }
  return Prototypes{PrototypeBank(Modality::kVisual, std::move(visual)),
                    PrototypeBank(Modality::kAudio, std::move(audio_rows)), std::move(clusters.assignments)};
}

void recompute_prototypes(Prototypes& protos, const Mat& objects, const Mat& audio) {
  const Index k = protos.visual.size();
  if (static_cast<Index>(protos.assignments.size()) != objects.rows() || objects.rows() != audio.rows())
    throw DomainError("recompute_prototypes: sample count does not match assignments");
  auto refresh = [&](PrototypeBank& bank, const Mat& x) {
    Mat sums;
    const auto counts = cluster_sums(x, protos.assignments, k, sums);
    for (Index r = 0; r < k; ++r) {
      const double n = sums.row(r).norm();
      if (counts[static_cast<std::size_t>(r)] == 0 || !(n > 0.0)) {
        spdlog::warn("recompute_prototypes: cluster {} is empty; keeping its previous row", r);
        continue;
      }
      bank.rows.row(r) = sums.row(r) / n;
    }
  };
  refresh(protos.visual, objects);
  refresh(protos.audio, audio);
}

double prototype_bce(const PrototypeBank& bank, const Mat& features, const Vec& targets, Mat* grad) {
  const Index k = bank.size();
  if (features.rows() != k || features.cols() != bank.dim() || targets.size() != k)
    throw DomainError("prototype_bce: shape mismatch");
  if (grad != nullptr) grad->setZero(k, bank.dim());
  const double inv_k = 1.0 / static_cast<double>(k);
  double total = 0.0;
  for (Index n = 0; n < k; ++n) {
    const Vec f = features.row(n).transpose();
    const Vec p = bank.rows.row(n).transpose();
    const double pred = remap_similarity(cosine_sim(p, f));
    total += bce(pred, targets(n));
    if (grad != nullptr) grad->row(n) = inv_k * 0.5 * bce_grad(pred, targets(n)) * cosine_grad(f, p).transpose();
  }
  return total * inv_k;
}

double single_source_loss(const PrototypeBank& audio_bank, const Vec& audio, const Vec& one_hot_label, Vec* grad) {
  if ((one_hot_label.array() != 0.0).count() != 1 || one_hot_label.sum() != 1.0)
    throw DomainError("single_source_loss: label must be one-hot");
  const Mat features = audio.transpose().replicate(audio_bank.size(), 1);
  Mat g;
  const double loss = prototype_bce(audio_bank, features, one_hot_label, grad != nullptr ? &g : nullptr);
  if (grad != nullptr) *grad = g.colwise().sum().transpose();
  return loss;
}

Vec one_hot(Index k, Index size) {
  if (k < 0 || k >= size) throw DomainError("one_hot: index out of range");
  Vec v = Vec::Zero(size);
  v(k) = 1.0;
  return v;
}

}  // namespace ier

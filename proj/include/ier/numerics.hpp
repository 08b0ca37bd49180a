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

// Similarity maps, pooling, probability utilities and k-means. Everything here
// is a pure function; the templated kernels accept any Eigen dense expression.

#ifndef IER_NUMERICS_HPP
#define IER_NUMERICS_HPP

#include "ier/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace ier {

inline constexpr double kBcePredictionClamp = 1e-7;
inline constexpr double kKlDenominatorClamp = 1e-12;

template <typename DerivedA, typename DerivedB>
double cosine_sim(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) throw DomainError("cosine_sim: length mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw DomainError("cosine_sim: zero-norm input");
  const double c = a.dot(b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

template <typename Derived>
Vec l2_normalize(const Eigen::MatrixBase<Derived>& v) {
  const double n = v.norm();
  if (!(n > 0.0)) throw DomainError("l2_normalize: zero vector");
  return v / n;
}

/// Backward pass of f = z / |z|: returns dL/dz given f and dL/df.
template <typename DerivedF, typename DerivedG>
Vec l2_normalize_backward(const Eigen::MatrixBase<DerivedF>& f, double znorm, const Eigen::MatrixBase<DerivedG>& grad_f) {
  return (grad_f - f * f.dot(grad_f)) / znorm;
}

/// Cosine similarity between each grid cell and `audio`.
template <typename Scalar, typename Derived>
SimilarityMap localization_map(const BasicFeatureGrid<Scalar>& grid, const Eigen::MatrixBase<Derived>& audio) {
  if (grid.channels() != audio.size()) throw DomainError("localization_map: channel mismatch");
  const double an = audio.norm();
  if (!(an > 0.0)) throw DomainError("localization_map: zero-norm audio feature");
  SimilarityMap out(grid.height, grid.width);
  for (Index i = 0; i < grid.size(); ++i) {
    const double cn = grid.cells.row(i).norm();
    if (!(cn > 0.0)) throw DomainError("localization_map: zero-norm grid cell");
    out.values(i) = std::clamp(grid.cells.row(i).dot(audio.transpose()) / (cn * an), -1.0, 1.0);
  }
  return out;
}

inline Index argmax_cell(const SimilarityMap& map) {
  if (map.size() == 0) throw DomainError("argmax_cell: empty map");
  Index best = 0;
  map.values.maxCoeff(&best);
  return best;
}

inline double global_max_pool(const SimilarityMap& map) {
  if (map.size() == 0) throw DomainError("global_max_pool: empty map");
  return map.values.maxCoeff();
}

inline double global_avg_pool(const SimilarityMap& map) {
  if (map.size() == 0) throw DomainError("global_avg_pool: empty map");
  return map.values.mean();
}

/// Max-shifted softmax.
template <typename Derived>
Vec softmax(const Eigen::MatrixBase<Derived>& scores) {
  if (scores.size() == 0) throw DomainError("softmax: empty input");
  if (!scores.allFinite()) throw DomainError("softmax: non-finite score");
  const double m = scores.maxCoeff();
  Vec e = (scores.array() - m).exp().matrix();
  return e / e.sum();
}

/// dL/dscores for p = softmax(scores), given p and dL/dp.
template <typename DerivedP, typename DerivedG>
Vec softmax_backward(const Eigen::MatrixBase<DerivedP>& p, const Eigen::MatrixBase<DerivedG>& grad_p) {
  const double inner = p.dot(grad_p);
  return (p.array() * (grad_p.array() - inner)).matrix();
}

/// KL(p || q) with 0 ln 0 := 0 and q clamped below at 1e-12.
template <typename DerivedP, typename DerivedQ>
double kl_divergence(const Eigen::MatrixBase<DerivedP>& p, const Eigen::MatrixBase<DerivedQ>& q) {
  if (p.size() != q.size()) throw DomainError("kl_divergence: length mismatch");
  double sum = 0.0;
  for (Index k = 0; k < p.size(); ++k) {
    if (p(k) <= 0.0) continue;
    sum += p(k) * std::log(p(k) / std::max(q(k), kKlDenominatorClamp));
  }
  return std::max(sum, 0.0);
}

/// Partial derivatives of KL(p || q) with respect to p and q.
struct KlGradient {
  Vec d_p;
  Vec d_q;
};

template <typename DerivedP, typename DerivedQ>
KlGradient kl_divergence_grad(const Eigen::MatrixBase<DerivedP>& p, const Eigen::MatrixBase<DerivedQ>& q) {
  KlGradient g{Vec::Zero(p.size()), Vec::Zero(q.size())};
  for (Index k = 0; k < p.size(); ++k) {
    if (p(k) <= 0.0) continue;
    const double qc = std::max(q(k), kKlDenominatorClamp);
    g.d_p(k) = std::log(p(k) / qc) + 1.0;
    if (q(k) > kKlDenominatorClamp) g.d_q(k) = -p(k) / q(k);
  }
  return g;
}

inline void check_bce_target(double target) {
  if (target != 0.0 && target != 1.0) throw DomainError("bce: target must be 0 or 1");
}

/// Binary cross-entropy with the prediction clamped to [1e-7, 1 - 1e-7].
inline double bce(double prediction, double target) {
  check_bce_target(target);
  const double p = std::clamp(prediction, kBcePredictionClamp, 1.0 - kBcePredictionClamp);
  return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

/// d bce / d prediction; zero where the clamp is active.
inline double bce_grad(double prediction, double target) {
  check_bce_target(target);
  if (prediction < kBcePredictionClamp || prediction > 1.0 - kBcePredictionClamp) return 0.0;
  return -target / prediction + (1.0 - target) / (1.0 - prediction);
}

/// Maps a cosine score from [-1, 1] onto [0, 1] so it can feed BCE.
inline double remap_similarity(double s) {
  if (!(s >= -1.0 && s <= 1.0)) throw DomainError("remap_similarity: input outside [-1, 1]");
  return (s + 1.0) / 2.0;
}

struct ClusterResult {
  Mat centroids;                     // K x C
  std::vector<Index> assignments;    // one per input row
  double inertia = 0.0;
  std::vector<double> inertia_history;  // after every assignment step
  int iterations = 0;
};

/// Lloyd iterations from k-means++ seeding; `points` holds one point per row.
ClusterResult kmeans(const Mat& points, Index k, std::uint64_t seed, int max_iter = 100);

}  // namespace ier

#endif  // IER_NUMERICS_HPP

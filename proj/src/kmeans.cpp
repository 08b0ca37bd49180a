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

#include "ier/numerics.hpp"
#include "ier/random.hpp"

#include <limits>

namespace ier {
namespace {

Mat seed_plus_plus(const Mat& points, Index k, Rng& rng) {
  const Index n = points.rows();
  Mat centroids(k, points.cols());
  centroids.row(0) = points.row(rng.index(n));
  Vec d2 = (points.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (Index c = 1; c < k; ++c) {
    const double total = d2.sum();
    Index pick = n - 1;
    if (total > 0.0) {
      const double r = rng.uniform(0.0, total);
      double acc = 0.0;
      for (Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (r < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.index(n);
    }
    centroids.row(c) = points.row(pick);
    d2 = d2.cwiseMin((points.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }
  return centroids;
}

double assign(const Mat& points, const Mat& centroids, std::vector<Index>& out) {
  double inertia = 0.0;
  for (Index i = 0; i < points.rows(); ++i) {
    Index best = 0;
    (centroids.rowwise() - points.row(i)).rowwise().squaredNorm().minCoeff(&best);
    out[static_cast<std::size_t>(i)] = best;
    inertia += (points.row(i) - centroids.row(best)).squaredNorm();
  }
  return inertia;
}

}  // namespace

ClusterResult kmeans(const Mat& points, Index k, std::uint64_t seed, int max_iter) {
  const Index n = points.rows();
  if (k < 1) throw DomainError("kmeans: K must be positive");
  if (n < k) throw DomainError("kmeans: fewer points than clusters");
  if (!points.allFinite()) throw DomainError("kmeans: non-finite input");

  Rng rng(seed);
  ClusterResult result;
  result.centroids = seed_plus_plus(points, k, rng);
  result.assignments.assign(static_cast<std::size_t>(n), 0);
  std::vector<Index> previous;

  for (int it = 0; it < max_iter; ++it) {
    const double inertia = assign(points, result.centroids, result.assignments);
    result.inertia_history.push_back(inertia);
    result.iterations = it + 1;
    if (it > 0 && result.assignments == previous) break;
    previous = result.assignments;

    Mat sums = Mat::Zero(k, points.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
      const Index c = result.assignments[static_cast<std::size_t>(i)];
      sums.row(c) += points.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    for (Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        result.centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      }
    }
    // Empty clusters move to the point farthest from its current centroid.
    for (Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      Index far = -1;
      double far_d = -1.0;
      for (Index i = 0; i < n; ++i) {
        const Index a = result.assignments[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(a)] < 2) continue;
        const double d = (points.row(i) - result.centroids.row(a)).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far < 0) break;
      const Index donor = result.assignments[static_cast<std::size_t>(far)];
      result.centroids.row(c) = points.row(far);
      result.assignments[static_cast<std::size_t>(far)] = c;
      --counts[static_cast<std::size_t>(donor)];
      counts[static_cast<std::size_t>(c)] = 1;
      if (counts[static_cast<std::size_t>(donor)] > 0) {
        Vec mean = Vec::Zero(points.cols());
        for (Index i = 0; i < n; ++i)
          if (result.assignments[static_cast<std::size_t>(i)] == donor) mean += points.row(i).transpose();
        result.centroids.row(donor) = mean / static_cast<double>(counts[static_cast<std::size_t>(donor)]);
      }
      previous = result.assignments;
    }
  }

  result.inertia = 0.0;
  for (Index i = 0; i < n; ++i)
    result.inertia += (points.row(i) - result.centroids.row(result.assignments[static_cast<std::size_t>(i)])).squaredNorm();
  return result;
}

}  // namespace ier

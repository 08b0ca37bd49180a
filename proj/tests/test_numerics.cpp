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
#include "ier/metrics.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace ier {
namespace {

using test::random_unit;
using test::unit;

TEST(CosineSim, Examples) {
  EXPECT_DOUBLE_EQ(cosine_sim(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)), 0.0);
  EXPECT_NEAR(cosine_sim(Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(1, 2, 3)), 1.0, 1e-15);
  EXPECT_NEAR(cosine_sim(Eigen::Vector2d(1, 0), Eigen::Vector2d(1, 1)), 0.70710678, 1e-8);
  EXPECT_THROW(cosine_sim(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1)), DomainError);
  EXPECT_THROW(cosine_sim(Vec::Ones(2), Vec::Ones(3)), DomainError);
}

TEST(CosineSim, SymmetricAndScaleInvariant) {
  Rng rng(1);
  for (int t = 0; t < 1000; ++t) {
    const Vec a = rng.normal_vector(6);
    const Vec b = rng.normal_vector(6);
    const double alpha = std::exp(rng.uniform(-5, 5));
    const double beta = std::exp(rng.uniform(-5, 5));
    const double c = cosine_sim(a, b);
    EXPECT_NEAR(cosine_sim(b, a), c, 1e-12);
    EXPECT_NEAR(cosine_sim(alpha * a, beta * b), c, 1e-9);
  }
}

TEST(LocalizationMap, Examples) {
  FeatureGrid one(1, 1, 2);
  one.cell(0, 0) = Eigen::RowVector2d(0.6, 0.8);
  EXPECT_NEAR(localization_map(one, Vec(Eigen::Vector2d(0.6, 0.8))).values(0), 1.0, 1e-15);

  FeatureGrid row(1, 2, 2);
  row.cell(0, 0) = Eigen::RowVector2d(1, 0);
  row.cell(0, 1) = Eigen::RowVector2d(0, 1);
  const SimilarityMap m = localization_map(row, unit(2, 0));
  EXPECT_DOUBLE_EQ(m(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(m(0, 1), 0.0);

  FeatureGrid sq(2, 2, 2);
  sq.cell(0, 0) = Eigen::RowVector2d(1, 0);
  sq.cell(0, 1) = Eigen::RowVector2d(0, 1);
  sq.cell(1, 0) = Eigen::RowVector2d(1, 0);
  sq.cell(1, 1) = Eigen::RowVector2d(-1, 0);
  const SimilarityMap s = localization_map(sq, unit(2, 0));
  EXPECT_DOUBLE_EQ(s(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(s(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(s(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(s(1, 1), -1.0);

  EXPECT_THROW(localization_map(sq, Vec::Ones(3)), DomainError);
}

TEST(LocalizationMap, StaysInRange) {
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    FeatureGrid g = test::random_grid(rng, 3, 4, 5);
    g.cells.rowwise().normalize();
    const SimilarityMap m = localization_map(g, random_unit(rng, 5));
    EXPECT_LE(m.values.maxCoeff(), 1.0);
    EXPECT_GE(m.values.minCoeff(), -1.0);
  }
}

TEST(Pooling, Examples) {
  EXPECT_DOUBLE_EQ(global_max_pool(SimilarityMap(2, 2, Eigen::Vector4d(0.2, 0.9, 0.1, 0.3))), 0.9);
  EXPECT_DOUBLE_EQ(global_max_pool(SimilarityMap(3, 3, Vec::Constant(9, 0.4))), 0.4);
  EXPECT_DOUBLE_EQ(global_max_pool(SimilarityMap(1, 2, Eigen::Vector2d(-1, -0.5))), -0.5);
  EXPECT_DOUBLE_EQ(global_avg_pool(SimilarityMap(2, 2, Eigen::Vector4d(0, 1, 1, 0))), 0.5);
  EXPECT_DOUBLE_EQ(global_avg_pool(SimilarityMap(3, 3, Vec::Constant(9, 0.4))), 0.4);
  EXPECT_DOUBLE_EQ(global_avg_pool(SimilarityMap(1, 4, Eigen::Vector4d(1, 2, 3, 6))), 3.0);
  EXPECT_THROW(global_max_pool(SimilarityMap()), DomainError);
  EXPECT_THROW(global_avg_pool(SimilarityMap()), DomainError);
}

TEST(Softmax, Examples) {
  const Vec a = softmax(Eigen::Vector2d(0, 0));
  EXPECT_DOUBLE_EQ(a(0), 0.5);
  const Vec b = softmax(Eigen::Vector2d(std::log(2.0), 0));
  EXPECT_NEAR(b(0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(b(1), 1.0 / 3.0, 1e-15);
  const Vec c = softmax(Eigen::Vector2d(1000, 0));
  EXPECT_TRUE(c.allFinite());
  EXPECT_NEAR(c(0), 1.0, 1e-15);
  EXPECT_LT(c(1), 1e-300);
}

TEST(Softmax, SimplexAndShiftInvariance) {
  Rng rng(3);
  for (int t = 0; t < 1000; ++t) {
    const Vec s = rng.normal_vector(1 + rng.index(10), 10.0);
    const Vec p = softmax(s);
    EXPECT_NEAR(p.sum(), 1.0, 1e-9);
    EXPECT_GE(p.minCoeff(), 0.0);
    const Vec q = softmax((s.array() + rng.uniform(-50, 50)).matrix());
    EXPECT_LT((p - q).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Softmax, BackwardMatchesFiniteDifference) {
  Rng rng(4);
  const Vec s = rng.normal_vector(5);
  const Vec g = rng.normal_vector(5);
  const Vec analytic = softmax_backward(softmax(s), g);
  for (Index i = 0; i < 5; ++i) {
    Vec hi = s, lo = s;
    hi(i) += 1e-6;
    lo(i) -= 1e-6;
    EXPECT_NEAR((softmax(hi).dot(g) - softmax(lo).dot(g)) / 2e-6, analytic(i), 1e-8);
  }
}

TEST(KlDivergence, Examples) {
  const Vec p = Eigen::Vector3d(0.2, 0.3, 0.5);
  EXPECT_DOUBLE_EQ(kl_divergence(p, p), 0.0);
  EXPECT_NEAR(kl_divergence(Eigen::Vector2d(1, 0), Eigen::Vector2d(0.5, 0.5)), std::log(2.0), 1e-15);
  EXPECT_NEAR(kl_divergence(Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0.9, 0.1)),
              0.5 * std::log(5.0 / 9.0) + 0.5 * std::log(5.0), 1e-15);
  EXPECT_NEAR(kl_divergence(Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0.9, 0.1)), 0.5108, 1e-4);
  EXPECT_THROW(kl_divergence(Vec::Ones(2), Vec::Ones(3)), DomainError);
}

TEST(KlDivergence, NonnegativeAndZeroOnlyForEqual) {
  Rng rng(5);
  for (int t = 0; t < 1000; ++t) {
    const Index k = 2 + rng.index(8);
    const Vec p = softmax(rng.normal_vector(k, 2.0));
    const Vec q = softmax(rng.normal_vector(k, 2.0));
    EXPECT_GE(kl_divergence(p, q), 0.0);
    EXPECT_EQ(kl_divergence(p, p), 0.0);
    if ((p - q).cwiseAbs().maxCoeff() > 1e-3) {
      EXPECT_GT(kl_divergence(p, q), 0.0);
    }
  }
}

TEST(KlDivergence, GradientMatchesFiniteDifference) {
  Rng rng(6);
  const Vec p = softmax(rng.normal_vector(4));
  const Vec q = softmax(rng.normal_vector(4));
  const KlGradient g = kl_divergence_grad(p, q);
  for (Index i = 0; i < 4; ++i) {
    Vec hi = p, lo = p;
    hi(i) += 1e-7;
    lo(i) -= 1e-7;
    EXPECT_NEAR((kl_divergence(hi, q) - kl_divergence(lo, q)) / 2e-7, g.d_p(i), 1e-6);
    hi = q;
    lo = q;
    hi(i) += 1e-7;
    lo(i) -= 1e-7;
    EXPECT_NEAR((kl_divergence(p, hi) - kl_divergence(p, lo)) / 2e-7, g.d_q(i), 1e-6);
  }
}

TEST(Bce, Examples) {
  EXPECT_NEAR(bce(0.5, 1), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce(1 - 1e-7, 1), 0.0, 1e-6);
  EXPECT_NEAR(bce(0.25, 0), -std::log(0.75), 1e-15);
  EXPECT_NEAR(bce(0.25, 0), 0.2877, 1e-4);
  EXPECT_THROW(bce(0.5, 0.5), DomainError);
  // Clamped at 1e-7 on both ends.
  EXPECT_NEAR(bce(0.0, 1), -std::log(1e-7), 1e-9);
  EXPECT_NEAR(bce(1.0, 0), -std::log(1e-7), 1e-6);
}

TEST(RemapSimilarity, Examples) {
  EXPECT_EQ(remap_similarity(1.0), 1.0);
  EXPECT_EQ(remap_similarity(-1.0), 0.0);
  EXPECT_EQ(remap_similarity(0.0), 0.5);
  EXPECT_THROW(remap_similarity(1.5), DomainError);
  EXPECT_THROW(remap_similarity(std::nan("")), DomainError);
}

TEST(RemapSimilarity, ComposedWithCosineHitsEndpointsExactly) {
  Rng rng(7);
  for (int t = 0; t < 100; ++t) {
    const Vec v = random_unit(rng, 7);
    EXPECT_EQ(remap_similarity(cosine_sim(v, v)), 1.0);
    EXPECT_EQ(remap_similarity(cosine_sim(v, Vec(-v))), 0.0);
  }
}

TEST(L2Normalize, Examples) {
  const Vec v = l2_normalize(Eigen::Vector2d(3, 4));
  EXPECT_DOUBLE_EQ(v(0), 0.6);
  EXPECT_DOUBLE_EQ(v(1), 0.8);
  EXPECT_EQ(l2_normalize(unit(3, 1)), unit(3, 1));
  EXPECT_THROW(l2_normalize(Eigen::Vector2d(0, 0)), DomainError);
}

TEST(KMeans, SeparatesTwoClouds) {
  Rng rng(8);
  const double sigma = 0.5;
  Mat pts(100, 2);
  std::vector<Index> truth;
  for (Index i = 0; i < 100; ++i) {
    const Index c = i < 50 ? 0 : 1;
    pts.row(i) = Eigen::RowVector2d(c * 10 * sigma + rng.normal(sigma), rng.normal(sigma));
    truth.push_back(c);
  }
  const ClusterResult r = kmeans(pts, 2, 11);
  EXPECT_DOUBLE_EQ(metrics::nmi(r.assignments, truth), 1.0);
}

TEST(KMeans, EachPointOwnCentroid) {
  Rng rng(9);
  const Mat pts = rng.normal_matrix(5, 3);
  const ClusterResult r = kmeans(pts, 5, 1);
  EXPECT_NEAR(r.inertia, 0.0, 1e-24);
  std::vector<bool> used(5, false);
  for (Index i = 0; i < 5; ++i) {
    EXPECT_LT((r.centroids.row(r.assignments[i]) - pts.row(i)).norm(), 1e-12);
    used[r.assignments[i]] = true;
  }
  for (bool u : used) EXPECT_TRUE(u);
}

TEST(KMeans, IdenticalPointsSingleCluster) {
  const Mat pts = Eigen::RowVector3d(1, 2, 3).replicate(10, 1);
  const ClusterResult r = kmeans(pts, 1, 0);
  EXPECT_LT((r.centroids.row(0) - Eigen::RowVector3d(1, 2, 3)).norm(), 1e-12);
}

TEST(KMeans, Errors) { EXPECT_THROW(kmeans(Mat::Zero(2, 2), 3, 0), DomainError); }

TEST(KMeans, DeterministicMonotoneAndConsistent) {
  Rng rng(10);
  for (int t = 0; t < 50; ++t) {
    const Index n = 20 + rng.index(40);
    const Index k = 1 + rng.index(6);
    const Mat pts = rng.normal_matrix(n, 3);
    const std::uint64_t seed = rng.index(1000);
    const ClusterResult a = kmeans(pts, k, seed);
    const ClusterResult b = kmeans(pts, k, seed);
    EXPECT_EQ(a.assignments, b.assignments);
    EXPECT_EQ(a.centroids, b.centroids);
    for (std::size_t i = 1; i < a.inertia_history.size(); ++i)
      EXPECT_LE(a.inertia_history[i], a.inertia_history[i - 1] + 1e-12);
    for (Index i = 0; i < n; ++i) EXPECT_LT(a.assignments[i], k);
    for (Index c = 0; c < k; ++c) {
      Eigen::RowVector3d mean = Eigen::RowVector3d::Zero();
      Index count = 0;
      for (Index i = 0; i < n; ++i)
        if (a.assignments[i] == c) {
          mean += pts.row(i);
          ++count;
        }
      if (count > 0 && a.iterations < 100) {
        EXPECT_LT((mean / double(count) - a.centroids.row(c)).norm(), 1e-6);
      }
    }
  }
}

}  // namespace
}  // namespace ier

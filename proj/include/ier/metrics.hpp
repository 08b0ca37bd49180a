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


#ifndef IER_METRICS_HPP
#define IER_METRICS_HPP

#include "ier/core.hpp"

#include <span>
#include <vector>

namespace ier::metrics {

/// Cells strictly above ratio * max(map); empty when the max is not positive.
BinaryMask binarize_prediction(const SimilarityMap& map, double ratio = 0.5);

/// Union of inclusive boxes rasterized on an h x w grid.
BinaryMask box_mask(std::span<const Box> boxes, Index height, Index width);

/// |a ∩ b| / |a ∪ b|, with 0/0 := 1.
double iou(const BinaryMask& a, const BinaryMask& b);

/// Mean of per-class IoU over classes with presence(t) = 1.
double ciou(const Vec& per_class_iou, const Vec& presence);

/// Area under success-rate(tau) = P(score >= tau), tau in {0, step, ..., 1}, trapezoids.
double auc(std::span<const double> scores, double step = 0.05);

/// Mutual information over sqrt(H(U) H(V)), natural log.
double nmi(std::span<const Index> predicted, std::span<const Index> truth);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

/// Precision and recall of {k : score_k > zeta} against a multi-hot truth.
PrecisionRecall multilabel_pr(const Vec& scores, const Vec& truth, double zeta = 0.5);

/// All-points average precision of one class; NaN without positives.
double average_precision(const Vec& scores, const Vec& truth);

/// Mean AP over the columns of (samples x classes) matrices; classes without
/// positives are skipped with a warning.
double map_metric(const Mat& scores, const Mat& truths);

inline constexpr Index kUnknownCategory = -1;

/// Majority true label per cluster, ties to the smallest id; empty clusters
/// map to kUnknownCategory.
std::vector<Index> cluster_to_category(std::span<const Index> assignments, std::span<const Index> labels, Index k);

struct MetricsReport {
  double iou_05 = 0.0;
  double auc = 0.0;
  double ciou_03 = 0.0;
  double nmi = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double map = 0.0;
};

}  // namespace ier::metrics

#endif  // IER_METRICS_HPP

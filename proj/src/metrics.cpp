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


#include "ier/metrics.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace ier::metrics {

BinaryMask binarize_prediction(const SimilarityMap& map, double ratio) {
  BinaryMask mask(map.height, map.width);
  if (map.size() == 0) return mask;
  const double peak = map.values.maxCoeff();
  if (!(peak > 0.0)) return mask;
  const double threshold = ratio * peak;
  for (Index i = 0; i < map.size(); ++i) mask.values(i) = map.values(i) > threshold ? 1 : 0;
  return mask;
}

BinaryMask box_mask(std::span<const Box> boxes, Index height, Index width) {
  BinaryMask mask(height, width);
  for (const auto& b : boxes) {
    if (b.y0 < 0 || b.x0 < 0 || b.y1 >= height || b.x1 >= width || b.y0 > b.y1 || b.x0 > b.x1)
      throw DomainError("box_mask: box outside the grid");
    for (Index y = b.y0; y <= b.y1; ++y)
      for (Index x = b.x0; x <= b.x1; ++x) mask(y, x) = 1;
  }
  return mask;
}

double iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.height != b.height || a.width != b.width) throw DomainError("iou: grid mismatch");
  Index inter = 0;
  Index uni = 0;
  for (Index i = 0; i < a.size(); ++i) {
    const bool x = a.values(i) != 0;
    const bool y = b.values(i) != 0;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double ciou(const Vec& per_class_iou, const Vec& presence) {
  if (per_class_iou.size() != presence.size()) throw DomainError("ciou: length mismatch");
  const double count = presence.sum();
  if (!(count > 0.0)) throw DomainError("ciou: no class present");
  return presence.dot(per_class_iou) / count;
}

double auc(std::span<const double> scores, double step) {
  if (scores.empty()) throw DomainError("auc: empty score list");
  if (!(step > 0.0) || step > 1.0) throw DomainError("auc: step must be in (0, 1]");
  const auto intervals = static_cast<int>(std::lround(1.0 / step));
  const auto n = static_cast<double>(scores.size());
  auto success = [&](int i) {
    const double tau = static_cast<double>(i) / static_cast<double>(intervals);
    return static_cast<double>(std::count_if(scores.begin(), scores.end(), [tau](double s) { return s >= tau; })) / n;
  };
  double area = 0.0;
  double prev = success(0);
  for (int i = 1; i <= intervals; ++i) {
    const double cur = success(i);
    area += 0.5 * (prev + cur) / static_cast<double>(intervals);
    prev = cur;
  }
  return area;
}

double nmi(std::span<const Index> predicted, std::span<const Index> truth) {
  if (predicted.size() != truth.size()) throw DomainError("nmi: length mismatch");
  if (predicted.empty()) throw DomainError("nmi: empty partitions");
  const auto n = static_cast<double>(predicted.size());
  std::map<Index, double> pu;
  std::map<Index, double> pv;
  std::map<std::pair<Index, Index>, double> joint;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    pu[predicted[i]] += 1.0;
    pv[truth[i]] += 1.0;
    joint[{predicted[i], truth[i]}] += 1.0;
  }
  auto entropy = [n](const std::map<Index, double>& counts) {
    double h = 0.0;
    for (const auto& [key, c] : counts) h -= (c / n) * std::log(c / n);
    return h;
  };
  const double hu = entropy(pu);
  const double hv = entropy(pv);
  if (pu.size() == 1 || pv.size() == 1) return (pu.size() == 1 && pv.size() == 1) ? 1.0 : 0.0;
  double mi = 0.0;
  for (const auto& [key, c] : joint) {
    const double pij = c / n;
    mi += pij * std::log(pij / ((pu[key.first] / n) * (pv[key.second] / n)));
  }
  return std::clamp(mi / std::sqrt(hu * hv), 0.0, 1.0);
}

PrecisionRecall multilabel_pr(const Vec& scores, const Vec& truth, double zeta) {
  if (scores.size() != truth.size()) throw DomainError("multilabel_pr: length mismatch");
  Index predicted = 0;
  Index hits = 0;
  Index positives = 0;
  for (Index k = 0; k < scores.size(); ++k) {
    const bool p = scores(k) > zeta;
    const bool t = truth(k) != 0.0;
    predicted += p ? 1 : 0;
    positives += t ? 1 : 0;
    hits += (p && t) ? 1 : 0;
  }
  PrecisionRecall pr;
  if (predicted == 0) {
    pr.precision = positives == 0 ? 1.0 : 0.0;
  } else {
    pr.precision = static_cast<double>(hits) / static_cast<double>(predicted);
  }
  pr.recall = positives == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(positives);
  return pr;
}

double average_precision(const Vec& scores, const Vec& truth) {
  if (scores.size() != truth.size()) throw DomainError("average_precision: length mismatch");
  std::vector<Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(a) > scores(b); });
  double hits = 0.0;
  double sum = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (truth(order[r]) == 0.0) continue;
    hits += 1.0;
    sum += hits / static_cast<double>(r + 1);
  }
  if (hits == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sum / hits;
}

double map_metric(const Mat& scores, const Mat& truths) {
  if (scores.rows() != truths.rows() || scores.cols() != truths.cols()) throw DomainError("map_metric: shape mismatch");
  double sum = 0.0;
  Index used = 0;
  for (Index c = 0; c < scores.cols(); ++c) {
    const double ap = average_precision(scores.col(c), truths.col(c));
    if (std::isnan(ap)) {
      spdlog::warn("map_metric: class {} has no positives; skipped", c);
      continue;
    }
    sum += ap;
    ++used;
  }
  if (used == 0) {
    spdlog::warn("map_metric: no class has positives");
    return 0.0;
  }
  return sum / static_cast<double>(used);
}

std::vector<Index> cluster_to_category(std::span<const Index> assignments, std::span<const Index> labels, Index k) {
  if (assignments.size() != labels.size()) throw DomainError("cluster_to_category: length mismatch");
  std::vector<std::map<Index, Index>> votes(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] < 0 || assignments[i] >= k) throw DomainError("cluster_to_category: cluster out of range");
    ++votes[static_cast<std::size_t>(assignments[i])][labels[i]];
  }
  std::vector<Index> out(static_cast<std::size_t>(k), kUnknownCategory);
  for (std::size_t c = 0; c < votes.size(); ++c) {
    Index best = 0;
    for (const auto& [label, count] : votes[c]) {  // ascending labels: ties keep the smallest
      if (count > best) {
        best = count;
        out[c] = label;
      }
    }
  }
  return out;
}

}  // namespace ier::metrics

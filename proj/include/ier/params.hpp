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

#ifndef IER_PARAMS_HPP
#define IER_PARAMS_HPP

#include "ier/core.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace ier {

/// Named view of one contiguous parameter block.
struct Block {
  std::string name;
  double* data = nullptr;
  Index rows = 0;
  Index cols = 0;

  [[nodiscard]] Index size() const { return rows * cols; }
};

inline Block block(std::string name, Mat& m) { return Block{std::move(name), m.data(), m.rows(), m.cols()}; }
inline Block block(std::string name, Vec& v) { return Block{std::move(name), v.data(), v.rows(), 1}; }

/// Packs the blocks into one vector in declaration order.
inline Vec flatten(const std::vector<Block>& blocks) {
  Index n = 0;
  for (const auto& b : blocks) n += b.size();
  Vec out(n);
  Index off = 0;
  for (const auto& b : blocks) {
    out.segment(off, b.size()) = Eigen::Map<const Vec>(b.data, b.size());
    off += b.size();
  }
  return out;
}

inline void unflatten(const Vec& flat, const std::vector<Block>& blocks) {
  Index off = 0;
  for (const auto& b : blocks) {
    if (off + b.size() > flat.size()) throw DomainError("unflatten: vector too short");
    Eigen::Map<Vec>(b.data, b.size()) = flat.segment(off, b.size());
    off += b.size();
  }
  if (off != flat.size()) throw DomainError("unflatten: vector too long");
}

/// y = W x + b.
struct Affine {
  Mat weight;
  Vec bias;

  Affine() = default;
  Affine(Mat w, Vec b) : weight(std::move(w)), bias(std::move(b)) {
    if (weight.rows() != bias.size()) throw DomainError("affine: bias size mismatch");
  }
  static Affine zeros(Index out, Index in) { return Affine(Mat::Zero(out, in), Vec::Zero(out)); }

  [[nodiscard]] Index in_dim() const { return weight.cols(); }
  [[nodiscard]] Index out_dim() const { return weight.rows(); }
  [[nodiscard]] Vec apply(const Vec& x) const {
    if (x.size() != in_dim()) throw DomainError("affine: input size mismatch");
    return weight * x + bias;
  }
};

/// Adam with bias correction.
struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  Vec m;
  Vec v;

  explicit AdamState(double learning_rate = 1e-4) : lr(learning_rate) {
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  }

  void update(Vec& params, const Vec& grad) {
    if (m.size() != params.size()) {
      m = Vec::Zero(params.size());
      v = Vec::Zero(params.size());
    }
    ++step;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }

  void update(const std::vector<Block>& params, const std::vector<Block>& grads) {
    Vec p = flatten(params);
    update(p, flatten(grads));
    unflatten(p, params);
  }
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  Index worst_index = -1;
  Vec analytic;
  Vec numeric;
};

/// Central finite differences (step h) against an analytic gradient.
/// Relative error per entry is |a - n| / max(|a|, |n|, floor) where floor is
/// 1e-3 of the largest analytic magnitude (and at least 1e-10).
GradCheckReport grad_check(const std::function<double(const Vec&)>& loss, const Vec& params, const Vec& analytic,
                           double h = 1e-4);

}  // namespace ier

#endif  // IER_PARAMS_HPP

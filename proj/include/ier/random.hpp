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

#ifndef IER_RANDOM_HPP
#define IER_RANDOM_HPP

#include "ier/core.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace ier {

/// Seeded generator shared by every stochastic routine. All draws go through
/// this wrapper so a (seed, config) pair fully determines an experiment.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal(double stddev = 1.0) { return std::normal_distribution<double>(0.0, stddev)(engine_); }
  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  Index index(Index n) { return std::uniform_int_distribution<Index>(0, n - 1)(engine_); }
  bool bernoulli(double p) { return uniform() < p; }

  /// Log-uniform draw on [lo, hi]; returns lo when lo == hi.
  double log_uniform(double lo, double hi) {
    if (lo == hi) return lo;
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }

  Vec normal_vector(Index n, double stddev = 1.0) {
    Vec v(n);
    for (Index i = 0; i < n; ++i) v(i) = normal(stddev);
    return v;
  }

  Mat normal_matrix(Index rows, Index cols, double stddev = 1.0) {
    Mat m(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) m(i, j) = normal(stddev);
    return m;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Seed for the i-th item of a batch derived from a base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) { return base + index; }

}  // namespace ier

#endif  // IER_RANDOM_HPP

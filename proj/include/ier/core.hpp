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

#ifndef IER_CORE_HPP
#define IER_CORE_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ier {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Error taxonomy. The CLI maps these onto process exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
/// Precondition or numeric-domain violation (zero norm, shape mismatch, ...).
struct DomainError : Error {
  using Error::Error;
};
/// Infeasible or inconsistent configuration.
struct ConfigError : Error {
  using Error::Error;
};
/// Malformed input file.
struct FormatError : Error {
  using Error::Error;
};
/// Filesystem failure.
struct IoError : Error {
  using Error::Error;
};
/// Invalid command sequencing from the CLI layer.
struct UsageError : Error {
  using Error::Error;
};

/// H x W grid of C-dim feature vectors. Cells are stored as rows of `cells`
/// in row-major spatial order, so cell (y, x) is row y * width + x.
template <typename Scalar>
struct BasicFeatureGrid {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Index height = 0;
  Index width = 0;
  Matrix cells;  // (height * width) x channels

  BasicFeatureGrid() = default;
  BasicFeatureGrid(Index h, Index w, Index c) : height(h), width(w), cells(Matrix::Zero(h * w, c)) {
    if (h < 1 || w < 1 || c < 1) throw DomainError("feature grid dimensions must be positive");
  }
  BasicFeatureGrid(Index h, Index w, Matrix data) : height(h), width(w), cells(std::move(data)) {
    if (h < 1 || w < 1 || cells.cols() < 1 || cells.rows() != h * w)
      throw DomainError("feature grid shape does not match its data");
  }

  [[nodiscard]] Index channels() const { return cells.cols(); }
  [[nodiscard]] Index size() const { return height * width; }
  [[nodiscard]] Index index(Index y, Index x) const { return y * width + x; }
  auto cell(Index y, Index x) { return cells.row(index(y, x)); }
  auto cell(Index y, Index x) const { return cells.row(index(y, x)); }
};

using FeatureGrid = BasicFeatureGrid<double>;

/// Spatial map stored row-major as a flat vector of length height * width.
template <typename Scalar>
struct BasicSpatialMap {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Index height = 0;
  Index width = 0;
  Vector values;

  BasicSpatialMap() = default;
  BasicSpatialMap(Index h, Index w) : height(h), width(w), values(Vector::Zero(h * w)) {}
  BasicSpatialMap(Index h, Index w, Vector v) : height(h), width(w), values(std::move(v)) {
    if (values.size() != h * w) throw DomainError("map shape does not match its data");
  }

  [[nodiscard]] Index size() const { return values.size(); }
  Scalar& operator()(Index y, Index x) { return values(y * width + x); }
  Scalar operator()(Index y, Index x) const { return values(y * width + x); }
};

using SimilarityMap = BasicSpatialMap<double>;
using BinaryMask = BasicSpatialMap<std::uint8_t>;

/// Inclusive cell rectangle on a feature grid.
struct Box {
  Index y0 = 0;
  Index x0 = 0;
  Index y1 = 0;
  Index x1 = 0;

  [[nodiscard]] bool contains(Index y, Index x) const { return y >= y0 && y <= y1 && x >= x0 && x <= x1; }
  [[nodiscard]] bool overlaps(const Box& o) const {
    return !(o.x0 > x1 || o.x1 < x0 || o.y0 > y1 || o.y1 < y0);
  }
  [[nodiscard]] Index area() const { return (y1 - y0 + 1) * (x1 - x0 + 1); }
};

}  // namespace ier

#endif  // IER_CORE_HPP

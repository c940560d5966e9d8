#pragma once

#include "malfam/schema.hpp"

#include <algorithm>
#include <string>

namespace malfam {

/// Per-feature bounds for MinMax scaling, tied to one schema.
struct ScaleParams {
  Vector min;
  Vector max;
  std::string schema_fingerprint;

  std::string to_json() const;
  static ScaleParams from_json(std::string_view document);
  bool operator==(const ScaleParams&) const = default;
};

struct ScaledDataset {
  Dataset data;
  std::size_t clamped = 0;  // values that fell outside [min, max]
};

/// Rows whose values are all finite, in order. Throws DataError if none remain.
Dataset drop_incomplete(const Dataset& dataset);

/// Keeps the first occurrence of each (values, category, family) triple.
Dataset dedupe(const Dataset& dataset);

ScaleParams fit_minmax(const Dataset& dataset);
ScaledDataset apply_minmax(const Dataset& dataset, const ScaleParams& params);

/// Column-wise min/max of any dense expression.
template <typename Derived>
std::pair<Vector, Vector> column_bounds(const Eigen::MatrixBase<Derived>& x) {
  if (x.rows() == 0) throw DataError("cannot fit scaling on an empty matrix");
  return {x.colwise().minCoeff().transpose(), x.colwise().maxCoeff().transpose()};
}

/// In-place (x - min) / (max - min), clamped to [0, 1]; a degenerate column
/// (max == min) maps to 0. Returns the number of clamped values.
template <typename Derived>
std::size_t minmax_scale_inplace(Eigen::MatrixBase<Derived>& x, const Vector& min, const Vector& max) {
  std::size_t clamped = 0;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double lo = min[c];
    const double span = max[c] - lo;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const double v = x(r, c);
      if (v < lo || v > max[c]) ++clamped;
      if (span > 0.0) {
        x(r, c) = std::clamp((v - lo) / span, 0.0, 1.0);
      } else {
        x(r, c) = 0.0;
      }
    }
  }
  return clamped;
}

}  // namespace malfam

#pragma once

#include "malfam/common.hpp"

#include <bit>
#include <cstdint>
#include <limits>
#include <vector>

namespace malfam::detail {

/// Exact identity of a row plus its labels. -0.0 folds into +0.0 and every
/// NaN folds into one quiet NaN so equal-looking rows compare equal.
struct RowKey {
  std::vector<std::uint64_t> bits;

  static RowKey make(const Matrix& values, Eigen::Index row, int category, int family) {
    RowKey key;
    key.bits.reserve(static_cast<std::size_t>(values.cols()) + 1);
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      double v = values(row, c) + 0.0;
      if (v != v) v = std::numeric_limits<double>::quiet_NaN();
      key.bits.push_back(std::bit_cast<std::uint64_t>(v));
    }
    key.bits.push_back((static_cast<std::uint64_t>(static_cast<std::uint32_t>(category)) << 32) |
                       static_cast<std::uint32_t>(family));
    return key;
  }

  bool operator==(const RowKey&) const = default;
};

struct RowKeyHash {
  std::size_t operator()(const RowKey& key) const {
    std::uint64_t h = 0x84222325cbf29ce4ULL;
    for (auto b : key.bits) h = splitmix64(h ^ b);
    return static_cast<std::size_t>(h);
  }
};

}  // namespace malfam::detail

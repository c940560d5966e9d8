#pragma once

#include "malfam/common.hpp"

#include <cmath>
#include <optional>

namespace malfam {

enum class ImpurityKind { entropy_bits, gini };

/// Entropy in bits or Gini impurity of a class-count vector (0 log 0 = 0).
template <typename Derived>
double impurity(const Eigen::DenseBase<Derived>& counts, ImpurityKind kind) {
  const auto p = counts.derived().template cast<double>().eval();
  if ((p.array() < 0.0).any()) throw DataError("impurity: negative class count");
  const double total = p.sum();
  if (!(total > 0.0)) throw DataError("impurity: all class counts are zero");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double q = p(i) / total;
    if (kind == ImpurityKind::gini) {
      acc += q * q;
    } else if (q > 0.0) {
      acc -= q * std::log2(q);
    }
  }
  return kind == ImpurityKind::gini ? 1.0 - acc : acc;
}

enum class SplitCriterion { gain_ratio, gini };

struct SplitCandidate {
  std::size_t feature = 0;
  double threshold = 0.0;
  double criterion = 0.0;  // gain ratio or Gini decrease
  double gain = 0.0;       // information gain (bits) or Gini decrease
};

/// Best binary split `value <= threshold` of one feature. Thresholds are
/// midpoints between consecutive distinct values.
///
/// Gini: maximizes the impurity decrease. Gain ratio: the threshold maximizing
/// information gain is chosen and its gain ratio reported, as C4.5 does for
/// continuous attributes. Ties go to the smaller threshold. Returns nullopt
/// when no admissible threshold has positive gain.
std::optional<SplitCandidate> best_split(std::span<const double> values, std::span<const int> labels,
                                         int class_count, SplitCriterion criterion,
                                         std::size_t min_leaf = 1);

struct TreeParams {
  SplitCriterion criterion = SplitCriterion::gain_ratio;
  int max_depth = 0;  // 0 = unlimited
  std::size_t min_samples_split = 2;
  std::size_t min_samples_leaf = 1;
  std::size_t max_features = 0;  // 0 = all features
};

/// Flat node. Leaves have feature == -1 and a class-count distribution.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> distribution;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

class DecisionTree {
 public:
  DecisionTree() = default;
  DecisionTree(std::vector<TreeNode> nodes, int class_count);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int class_count() const { return class_count_; }
  std::size_t depth() const;

  /// Dense class index of the majority at the reached leaf (lowest on ties).
  template <typename Derived>
  int predict(const Eigen::DenseBase<Derived>& row) const {
    const auto& d = row.derived();
    int node = 0;
    while (!nodes_[static_cast<std::size_t>(node)].is_leaf()) {
      const auto& n = nodes_[static_cast<std::size_t>(node)];
      node = d(n.feature) <= n.threshold ? n.left : n.right;
    }
    return majority(nodes_[static_cast<std::size_t>(node)].distribution);
  }

  static int majority(const std::vector<double>& distribution);

  bool operator==(const DecisionTree&) const = default;

 private:
  std::vector<TreeNode> nodes_;
  int class_count_ = 0;
};

/// Dense per-column ranks of a matrix (equal values share a rank) and the
/// distinct sorted values of each column, so nodes can sort integer keys.
struct ColumnRanks {
  std::size_t rows = 0;
  std::vector<std::uint32_t> rank;           // column-major, rows x cols
  std::vector<std::vector<double>> values;  // values[c][rank]
};

ColumnRanks rank_columns(const Eigen::Ref<const Matrix>& x);

/// Grows a tree on `rows` of `x` (duplicates allowed, e.g. a bootstrap).
/// Features considered at each node are all of them, or a random subset of
/// params.max_features drawn from `rng`. Candidate features are compared in
/// ascending ordinal order so ties resolve to the smaller ordinal.
DecisionTree grow_tree(const Eigen::Ref<const Matrix>& x, std::span<const int> labels, int class_count,
                       std::vector<std::size_t> rows, const TreeParams& params, Rng* rng = nullptr,
                       const ColumnRanks* ranks = nullptr);

}  // namespace malfam

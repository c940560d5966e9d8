#include "malfam/tree.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <numeric>

namespace malfam {

namespace {

constexpr double kMinGain = 1e-12;

using ValueLabel = std::pair<double, int>;

struct ScanResult {
  double threshold;
  double criterion;
  double gain;
};

inline double xlog2x(double c) { return c > 0.0 ? c * std::log2(c) : 0.0; }

double midpoint(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return (mid > lo && mid < hi) ? mid : lo;
}

/// One pass over samples sorted by value; `value(i)` and `label(i)` read the
/// i-th sorted sample. `totals` holds the class counts of the whole range;
/// `left` is scratch of length class_count.
template <typename ValueAt, typename LabelAt>
std::optional<ScanResult> scan_sorted(std::size_t n, ValueAt value, LabelAt label, std::span<const double> totals,
                                      SplitCriterion criterion, std::size_t min_leaf, std::vector<double>& left) {
  if (n < 2) return std::nullopt;
  const double nd = static_cast<double>(n);
  std::fill(left.begin(), left.end(), 0.0);
  min_leaf = std::max<std::size_t>(min_leaf, 1);

  std::size_t best_i = n;
  double best_gain = kMinGain;

  if (criterion == SplitCriterion::gain_ratio) {
    double s_total = 0.0;
    for (double t : totals) s_total += xlog2x(t);
    const double parent = std::log2(nd) - s_total / nd;
    double s_left = 0.0;
    double s_right = s_total;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const auto c = static_cast<std::size_t>(label(i));
      const double lc = left[c];
      const double rc = totals[c] - lc;
      s_left += xlog2x(lc + 1.0) - xlog2x(lc);
      s_right += xlog2x(rc - 1.0) - xlog2x(rc);
      left[c] = lc + 1.0;
      if (!(value(i) < value(i + 1))) continue;
      const std::size_t nl = i + 1;
      const std::size_t nr = n - nl;
      if (nl < min_leaf || nr < min_leaf) continue;
      const double l = static_cast<double>(nl);
      const double r = static_cast<double>(nr);
      const double h_left = std::log2(l) - s_left / l;
      const double h_right = std::log2(r) - s_right / r;
      const double gain = parent - (l / nd) * h_left - (r / nd) * h_right;
      if (gain > best_gain) {
        best_gain = gain;
        best_i = i;
      }
    }
    if (best_i == n) return std::nullopt;
    const double pl = static_cast<double>(best_i + 1) / nd;
    const double pr = 1.0 - pl;
    const double split_info = -(pl * std::log2(pl) + pr * std::log2(pr));
    return ScanResult{midpoint(value(best_i), value(best_i + 1)), best_gain / split_info, best_gain};
  }

  double sq_total = 0.0;
  for (double t : totals) sq_total += t * t;
  const double parent = 1.0 - sq_total / (nd * nd);
  double sq_left = 0.0;
  double sq_right = sq_total;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const auto c = static_cast<std::size_t>(label(i));
    const double lc = left[c];
    const double rc = totals[c] - lc;
    sq_left += 2.0 * lc + 1.0;
    sq_right -= 2.0 * rc - 1.0;
    left[c] = lc + 1.0;
    if (!(value(i) < value(i + 1))) continue;
    const std::size_t nl = i + 1;
    const std::size_t nr = n - nl;
    if (nl < min_leaf || nr < min_leaf) continue;
    const double l = static_cast<double>(nl);
    const double r = static_cast<double>(nr);
    const double decrease = parent - (l / nd) * (1.0 - sq_left / (l * l)) - (r / nd) * (1.0 - sq_right / (r * r));
    if (decrease > best_gain) {
      best_gain = decrease;
      best_i = i;
    }
  }
  if (best_i == n) return std::nullopt;
  return ScanResult{midpoint(value(best_i), value(best_i + 1)), best_gain, best_gain};
}

/// LSD radix sort of 64-bit keys below 2^bits, 11 bits per pass.
void radix_sort(std::vector<std::uint64_t>& keys, std::vector<std::uint64_t>& scratch, int bits) {
  if (keys.size() < 64) {
    std::sort(keys.begin(), keys.end());
    return;
  }
  scratch.resize(keys.size());
  constexpr int kDigit = 8;
  constexpr std::size_t kBuckets = std::size_t{1} << kDigit;
  std::uint32_t count[kBuckets];
  for (int shift = 0; shift < bits; shift += kDigit) {
    std::fill(count, count + kBuckets, std::uint32_t{0});
    for (const auto k : keys) ++count[(k >> shift) & (kBuckets - 1)];
    std::uint32_t sum = 0;
    for (auto& c : count) {
      const auto here = c;
      c = sum;
      sum += here;
    }
    for (const auto k : keys) scratch[count[(k >> shift) & (kBuckets - 1)]++] = k;
    keys.swap(scratch);
  }
}

int bit_width_of(std::size_t v) { return v == 0 ? 1 : static_cast<int>(std::bit_width(v)); }

}  // namespace

std::optional<SplitCandidate> best_split(std::span<const double> values, std::span<const int> labels,
                                         int class_count, SplitCriterion criterion, std::size_t min_leaf) {
  if (values.size() != labels.size()) throw DataError("best_split: values and labels differ in length");
  if (class_count < 1) throw DataError("best_split: class count must be positive");
  std::vector<ValueLabel> sorted;
  std::vector<double> totals(static_cast<std::size_t>(class_count), 0.0);
  sorted.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= class_count) throw DataError("best_split: label out of range");
    sorted.emplace_back(values[i], labels[i]);
    totals[static_cast<std::size_t>(labels[i])] += 1.0;
  }
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> scratch(static_cast<std::size_t>(class_count));
  const auto result = scan_sorted(
      sorted.size(), [&](std::size_t i) { return sorted[i].first; }, [&](std::size_t i) { return sorted[i].second; },
      totals, criterion, min_leaf, scratch);
  if (!result) return std::nullopt;
  return SplitCandidate{0, result->threshold, result->criterion, result->gain};
}

DecisionTree::DecisionTree(std::vector<TreeNode> nodes, int class_count)
    : nodes_(std::move(nodes)), class_count_(class_count) {
  if (nodes_.empty()) throw DataError("decision tree has no nodes");
  const auto count = static_cast<int>(nodes_.size());
  for (const auto& node : nodes_) {
    if (node.is_leaf()) {
      if (node.distribution.size() != static_cast<std::size_t>(class_count)) {
        throw DataError("decision tree leaf has a malformed distribution");
      }
    } else if (node.left <= 0 || node.left >= count || node.right <= 0 || node.right >= count) {
      throw DataError("decision tree node has an invalid child index");
    }
  }
}

std::size_t DecisionTree::depth() const {
  std::size_t deepest = 0;
  std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [node, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    const auto& n = nodes_[static_cast<std::size_t>(node)];
    if (!n.is_leaf()) {
      stack.emplace_back(n.left, d + 1);
      stack.emplace_back(n.right, d + 1);
    }
  }
  return deepest;
}

int DecisionTree::majority(const std::vector<double>& distribution) {
  return static_cast<int>(std::max_element(distribution.begin(), distribution.end()) - distribution.begin());
}

ColumnRanks rank_columns(const Eigen::Ref<const Matrix>& x) {
  ColumnRanks out;
  const auto n = static_cast<std::size_t>(x.rows());
  out.rows = n;
  out.rank.resize(n * static_cast<std::size_t>(x.cols()));
  out.values.resize(static_cast<std::size_t>(x.cols()));
  std::vector<std::size_t> order(n);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return x(static_cast<Eigen::Index>(a), c) < x(static_cast<Eigen::Index>(b), c);
    });
    auto& distinct = out.values[static_cast<std::size_t>(c)];
    auto* rank = out.rank.data() + static_cast<std::size_t>(c) * n;
    for (const auto r : order) {
      const double v = x(static_cast<Eigen::Index>(r), c);
      if (distinct.empty() || distinct.back() < v) distinct.push_back(v);
      rank[r] = static_cast<std::uint32_t>(distinct.size() - 1);
    }
  }
  return out;
}

DecisionTree grow_tree(const Eigen::Ref<const Matrix>& x, std::span<const int> labels, int class_count,
                       std::vector<std::size_t> rows, const TreeParams& params, Rng* rng,
                       const ColumnRanks* ranks) {
  if (rows.empty()) throw DataError("cannot grow a tree on zero samples");
  if (class_count < 1) throw DataError("tree needs at least one class");
  ColumnRanks own;
  if (ranks == nullptr) {
    own = rank_columns(x);
    ranks = &own;
  } else if (ranks->rows != static_cast<std::size_t>(x.rows()) || ranks->values.size() != static_cast<std::size_t>(x.cols())) {
    throw DataError("column ranks do not match the training matrix");
  }
  const int label_bits = bit_width_of(static_cast<std::size_t>(class_count - 1));
  const std::uint64_t label_mask = (std::uint64_t{1} << label_bits) - 1;
  const int key_bits = label_bits + bit_width_of(ranks->rows);
  const auto d = static_cast<std::size_t>(x.cols());
  const bool subsample = params.max_features > 0 && params.max_features < d;
  if (subsample && rng == nullptr) throw ConfigError("feature subsampling needs a random generator");

  struct Work {
    int node;
    std::size_t begin;
    std::size_t end;
    int depth;
  };

  std::vector<TreeNode> nodes(1);
  std::vector<Work> stack{{0, 0, rows.size(), 0}};
  std::vector<std::size_t> feature_pool(d);
  std::iota(feature_pool.begin(), feature_pool.end(), std::size_t{0});
  std::vector<std::size_t> candidates;
  std::vector<std::uint64_t> keys, key_scratch;
  std::vector<double> counts(static_cast<std::size_t>(class_count));
  std::vector<double> scratch(static_cast<std::size_t>(class_count));
  std::vector<SplitCandidate> found;

  while (!stack.empty()) {
    const Work work = stack.back();
    stack.pop_back();
    const std::size_t n = work.end - work.begin;

    std::fill(counts.begin(), counts.end(), 0.0);
    for (std::size_t i = work.begin; i < work.end; ++i) counts[static_cast<std::size_t>(labels[rows[i]])] += 1.0;
    const auto present = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; });

    std::optional<SplitCandidate> chosen;
    const bool can_split = n >= std::max<std::size_t>(params.min_samples_split, 2) && present > 1 &&
                           (params.max_depth <= 0 || work.depth < params.max_depth);
    if (can_split) {
      if (subsample) {
        for (std::size_t i = 0; i < params.max_features; ++i) {
          const auto j = i + static_cast<std::size_t>(rng->below(d - i));
          std::swap(feature_pool[i], feature_pool[j]);
        }
        candidates.assign(feature_pool.begin(), feature_pool.begin() + static_cast<std::ptrdiff_t>(params.max_features));
        std::sort(candidates.begin(), candidates.end());
      } else {
        candidates = feature_pool;
        std::sort(candidates.begin(), candidates.end());
      }

      found.clear();
      keys.resize(n);
      for (const auto f : candidates) {
        const auto* rank = ranks->rank.data() + f * ranks->rows;
        for (std::size_t i = 0; i < n; ++i) {
          const auto r = rows[work.begin + i];
          keys[i] = (std::uint64_t{rank[r]} << label_bits) | static_cast<std::uint64_t>(labels[r]);
        }
        radix_sort(keys, key_scratch, key_bits);
        if ((keys.front() >> label_bits) == (keys.back() >> label_bits)) continue;
        const auto& distinct = ranks->values[f];
        const auto scan = scan_sorted(
            n, [&](std::size_t i) { return distinct[keys[i] >> label_bits]; },
            [&](std::size_t i) { return static_cast<int>(keys[i] & label_mask); }, counts, params.criterion,
            params.min_samples_leaf, scratch);
        if (scan) {
          found.push_back({f, scan->threshold, scan->criterion, scan->gain});
        }
      }

      if (!found.empty()) {
        // C4.5 only weighs gain ratio among attributes with at least average gain.
        double floor = -1.0;
        if (params.criterion == SplitCriterion::gain_ratio) {
          double sum = 0.0;
          for (const auto& c : found) sum += c.gain;
          floor = sum / static_cast<double>(found.size()) - 1e-12;
        }
        for (const auto& c : found) {
          if (c.gain < floor) continue;
          if (!chosen || c.criterion > chosen->criterion) chosen = c;
        }
      }
    }

    if (!chosen) {
      nodes[static_cast<std::size_t>(work.node)].distribution = counts;
      continue;
    }

    const auto f = static_cast<Eigen::Index>(chosen->feature);
    const double threshold = chosen->threshold;
    const auto middle = std::partition(rows.begin() + static_cast<std::ptrdiff_t>(work.begin),
                                       rows.begin() + static_cast<std::ptrdiff_t>(work.end),
                                       [&](std::size_t r) { return x(static_cast<Eigen::Index>(r), f) <= threshold; });
    const auto split = static_cast<std::size_t>(middle - rows.begin());

    const int left = static_cast<int>(nodes.size());
    const int right = left + 1;
    nodes.emplace_back();
    nodes.emplace_back();
    auto& node = nodes[static_cast<std::size_t>(work.node)];
    node.feature = static_cast<int>(chosen->feature);
    node.threshold = threshold;
    node.left = left;
    node.right = right;
    stack.push_back({right, split, work.end, work.depth + 1});
    stack.push_back({left, work.begin, split, work.depth + 1});
  }
  return DecisionTree(std::move(nodes), class_count);
}

}  // namespace malfam

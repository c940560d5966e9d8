#pragma once

#include "malfam/schema.hpp"

#include <iosfwd>

namespace malfam {

enum class SelectionMethod { chi2, mi };

std::string_view to_string(SelectionMethod method);
SelectionMethod parse_selection_method(std::string_view text);

inline constexpr int kDefaultMiBins = 10;

struct RankingEntry {
  std::size_t ordinal;  // column position in the scored matrix
  double score;
};

/// Scores sorted descending; equal scores keep ascending ordinal order.
struct FeatureRanking {
  SelectionMethod method = SelectionMethod::chi2;
  std::vector<RankingEntry> entries;
  int bins = 0;  // MI only

  std::size_t size() const { return entries.size(); }
};

struct SelectionConfig {
  SelectionMethod method = SelectionMethod::mi;
  int threshold_percent = 100;
  int bins = kDefaultMiBins;
};

struct FeatureMask {
  std::vector<std::size_t> selected;  // ascending schema ordinals
  SelectionMethod method = SelectionMethod::chi2;
  int threshold_percent = 100;

  bool operator==(const FeatureMask&) const = default;
};

/// Class-sum chi-squared score per column. Requires nonnegative values and at
/// least two distinct labels.
Vector chi2_scores(const Eigen::Ref<const Matrix>& x, std::span<const int> labels);

/// Plug-in mutual information (bits) between each equal-frequency-binned
/// column and the labels.
Vector mi_scores(const Eigen::Ref<const Matrix>& x, std::span<const int> labels, int bins);

/// Equal-frequency bin index per value. Sorted position i maps to bin
/// floor(i * bins / n); a run of equal values takes the bin of its first
/// position, so ties never straddle a boundary.
std::vector<int> bin_equal_frequency(std::span<const double> values, int bins);

FeatureRanking rank_scores(SelectionMethod method, const Vector& scores, int bins = 0);

FeatureRanking score_chi2(const Dataset& dataset, Task task);
FeatureRanking score_mi(const Dataset& dataset, Task task, int bins = kDefaultMiBins);
FeatureRanking score_features(const Eigen::Ref<const Matrix>& x, std::span<const int> labels,
                              SelectionMethod method, int bins = kDefaultMiBins);

/// ceil(percent * total / 100).
std::size_t threshold_count(int percent, std::size_t total);

FeatureMask select_top(const FeatureRanking& ranking, std::size_t count);
FeatureMask select_threshold(const FeatureRanking& ranking, int percent);

Dataset apply_mask(const Dataset& dataset, const FeatureMask& mask);

/// Columns of `x` listed by the mask, in mask order.
Matrix project_columns(const Eigen::Ref<const Matrix>& x, const FeatureMask& mask);

/// rank,feature_id,feature_name,score
void write_ranking_csv(std::ostream& out, const FeatureRanking& ranking, const FeatureSchema& schema);

}  // namespace malfam

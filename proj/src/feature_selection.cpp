#include "malfam/feature_selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace malfam {

namespace {

/// Dense class index per sample plus per-class counts, over present labels.
struct DenseLabels {
  std::vector<int> index;
  std::vector<long long> counts;
};

DenseLabels densify(std::span<const int> labels) {
  std::vector<int> distinct(labels.begin(), labels.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  DenseLabels out;
  out.counts.assign(distinct.size(), 0);
  out.index.reserve(labels.size());
  for (int label : labels) {
    const auto c = std::lower_bound(distinct.begin(), distinct.end(), label) - distinct.begin();
    out.index.push_back(static_cast<int>(c));
    ++out.counts[static_cast<std::size_t>(c)];
  }
  return out;
}

}  // namespace

std::string_view to_string(SelectionMethod method) { return method == SelectionMethod::chi2 ? "chi2" : "mi"; }

SelectionMethod parse_selection_method(std::string_view text) {
  const auto key = to_lower_trimmed(text);
  if (key == "chi2") return SelectionMethod::chi2;
  if (key == "mi") return SelectionMethod::mi;
  throw ConfigError("unknown selection method '" + std::string(text) + "' (expected chi2 or mi)");
}

Vector chi2_scores(const Eigen::Ref<const Matrix>& x, std::span<const int> labels) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) throw DataError("chi2: label count differs from rows");
  const auto dense = densify(labels);
  const auto classes = static_cast<Eigen::Index>(dense.counts.size());
  if (classes < 2) throw DataError("chi2 scoring needs at least two classes");
  if ((x.array() < 0.0).any()) throw DataError("chi2 scoring needs nonnegative feature values");

  Matrix observed = Matrix::Zero(classes, x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) observed.row(dense.index[static_cast<std::size_t>(r)]) += x.row(r);
  const RowVector totals = observed.colwise().sum();
  const double n = static_cast<double>(x.rows());

  Vector scores = Vector::Zero(x.cols());
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    if (totals[f] == 0.0) continue;
    double score = 0.0;
    for (Eigen::Index c = 0; c < classes; ++c) {
      const double expected = totals[f] * static_cast<double>(dense.counts[static_cast<std::size_t>(c)]) / n;
      const double diff = observed(c, f) - expected;
      score += diff * diff / expected;
    }
    scores[f] = score;
  }
  return scores;
}

std::vector<int> bin_equal_frequency(std::span<const double> values, int bins) {
  if (bins < 1) throw ConfigError("bin count must be >= 1");
  const auto n = values.size();
  std::vector<int> assignment(n, 0);
  if (n == 0) return assignment;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  int current = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0 || values[order[i]] != values[order[i - 1]]) {
      current = static_cast<int>((static_cast<long long>(i) * bins) / static_cast<long long>(n));
    }
    assignment[order[i]] = current;
  }
  return assignment;
}

Vector mi_scores(const Eigen::Ref<const Matrix>& x, std::span<const int> labels, int bins) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) throw DataError("MI: label count differs from rows");
  if (bins < 2) throw ConfigError("MI scoring needs at least two bins");
  const auto dense = densify(labels);
  const auto classes = dense.counts.size();
  if (classes < 2) throw DataError("MI scoring needs at least two classes");
  const auto n = static_cast<long long>(x.rows());

  Vector scores = Vector::Zero(x.cols());
  std::vector<double> column(static_cast<std::size_t>(n));
  std::vector<long long> joint(static_cast<std::size_t>(bins) * classes);
  std::vector<long long> marginal(static_cast<std::size_t>(bins));
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) column[static_cast<std::size_t>(r)] = x(r, f);
    const auto assignment = bin_equal_frequency(column, bins);
    std::fill(joint.begin(), joint.end(), 0);
    std::fill(marginal.begin(), marginal.end(), 0);
    for (std::size_t i = 0; i < assignment.size(); ++i) {
      const auto b = static_cast<std::size_t>(assignment[i]);
      ++joint[b * classes + static_cast<std::size_t>(dense.index[i])];
      ++marginal[b];
    }
    double mi = 0.0;
    for (std::size_t b = 0; b < static_cast<std::size_t>(bins); ++b) {
      if (marginal[b] == 0) continue;
      for (std::size_t c = 0; c < classes; ++c) {
        const long long nxy = joint[b * classes + c];
        if (nxy == 0) continue;
        const double ratio = static_cast<double>(nxy * n) / static_cast<double>(marginal[b] * dense.counts[c]);
        mi += static_cast<double>(nxy) / static_cast<double>(n) * std::log2(ratio);
      }
    }
    scores[f] = std::max(mi, 0.0);
  }
  return scores;
}

FeatureRanking rank_scores(SelectionMethod method, const Vector& scores, int bins) {
  FeatureRanking ranking;
  ranking.method = method;
  ranking.bins = method == SelectionMethod::mi ? bins : 0;
  ranking.entries.reserve(static_cast<std::size_t>(scores.size()));
  for (Eigen::Index f = 0; f < scores.size(); ++f) ranking.entries.push_back({static_cast<std::size_t>(f), scores[f]});
  std::stable_sort(ranking.entries.begin(), ranking.entries.end(),
                   [](const RankingEntry& a, const RankingEntry& b) { return a.score > b.score; });
  return ranking;
}

FeatureRanking score_features(const Eigen::Ref<const Matrix>& x, std::span<const int> labels,
                              SelectionMethod method, int bins) {
  if (method == SelectionMethod::chi2) return rank_scores(method, chi2_scores(x, labels));
  return rank_scores(method, mi_scores(x, labels, bins), bins);
}

FeatureRanking score_chi2(const Dataset& dataset, Task task) {
  return score_features(dataset.values(), dataset.labels(task), SelectionMethod::chi2);
}

FeatureRanking score_mi(const Dataset& dataset, Task task, int bins) {
  return score_features(dataset.values(), dataset.labels(task), SelectionMethod::mi, bins);
}

std::size_t threshold_count(int percent, std::size_t total) {
  if (percent < 1 || percent > 100) throw ConfigError("threshold percent must be in [1, 100]");
  if (total < 1) throw ConfigError("threshold needs at least one feature");
  return (static_cast<std::size_t>(percent) * total + 99) / 100;
}

FeatureMask select_top(const FeatureRanking& ranking, std::size_t count) {
  if (count < 1 || count > ranking.size()) {
    throw ConfigError("selection count " + std::to_string(count) + " outside [1, " +
                      std::to_string(ranking.size()) + "]");
  }
  FeatureMask mask;
  mask.method = ranking.method;
  mask.threshold_percent = static_cast<int>((count * 100 + ranking.size() - 1) / ranking.size());
  for (std::size_t i = 0; i < count; ++i) mask.selected.push_back(ranking.entries[i].ordinal);
  std::sort(mask.selected.begin(), mask.selected.end());
  return mask;
}

FeatureMask select_threshold(const FeatureRanking& ranking, int percent) {
  auto mask = select_top(ranking, threshold_count(percent, ranking.size()));
  mask.threshold_percent = percent;
  return mask;
}

Matrix project_columns(const Eigen::Ref<const Matrix>& x, const FeatureMask& mask) {
  Matrix out(x.rows(), static_cast<Eigen::Index>(mask.selected.size()));
  for (std::size_t j = 0; j < mask.selected.size(); ++j) {
    const auto c = static_cast<Eigen::Index>(mask.selected[j]);
    if (c >= x.cols()) throw DataError("mask ordinal out of range");
    out.col(static_cast<Eigen::Index>(j)) = x.col(c);
  }
  return out;
}

Dataset apply_mask(const Dataset& dataset, const FeatureMask& mask) {
  if (mask.selected.empty()) throw ConfigError("feature mask is empty");
  if (std::adjacent_find(mask.selected.begin(), mask.selected.end(), std::greater_equal<>()) != mask.selected.end()) {
    throw ConfigError("feature mask ordinals must be strictly ascending");
  }
  auto schema = std::make_shared<const FeatureSchema>(dataset.schema().project(mask.selected));
  return dataset.with_schema(std::move(schema), project_columns(dataset.values(), mask));
}

void write_ranking_csv(std::ostream& out, const FeatureRanking& ranking, const FeatureSchema& schema) {
  out << "rank,feature_id,feature_name,score\n";
  for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
    const auto& entry = ranking.entries[i];
    const auto& feature = schema[entry.ordinal];
    out << (i + 1) << ',' << feature.id << ',' << feature.name << ',' << format_double(entry.score) << '\n';
  }
}

}  // namespace malfam

#pragma once

#include "malfam/evaluation.hpp"

#include <cmath>
#include <map>
#include <memory>

namespace malfam::testing {

inline std::string data_path(const std::string& name) { return std::string(MALFAM_DATA_DIR) + "/" + name; }

inline SchemaPtr canonical_schema() {
  static const auto schema = std::make_shared<const FeatureSchema>(load_schema_file(data_path("schema_141.json")));
  return schema;
}

inline TaxonomyPtr canonical_taxonomy() {
  static const auto taxonomy =
      std::make_shared<const LabelTaxonomy>(load_taxonomy_file(data_path("taxonomy_andmal2020.json")));
  return taxonomy;
}

/// Features f1..fd in the Memory group.
inline SchemaPtr small_schema(std::size_t d) {
  std::vector<FeatureDescriptor> features;
  for (std::size_t i = 0; i < d; ++i) {
    features.push_back({"F" + std::to_string(i + 1), "f" + std::to_string(i + 1), FeatureGroup::Memory});
  }
  return std::make_shared<const FeatureSchema>(std::move(features));
}

/// Categories A, B, C with families a1, b1, c1, a2.
inline TaxonomyPtr small_taxonomy() {
  return std::make_shared<const LabelTaxonomy>(
      std::vector<std::string>{"A", "B", "C"},
      std::vector<FamilyEntry>{{"a1", 0}, {"b1", 1}, {"c1", 2}, {"a2", 0}});
}

/// Dataset over small_schema/small_taxonomy; family = first family of the category.
inline Dataset small_dataset(const Matrix& x, const Labels& categories) {
  Labels families;
  for (int c : categories) families.push_back(c);
  return Dataset(small_schema(static_cast<std::size_t>(x.cols())), small_taxonomy(), x, categories, families);
}

// ---- independent oracles ------------------------------------------------

/// Chi2 via sum(O^2 / E) - T over the class-by-feature-sum table.
inline double chi2_oracle(const std::vector<double>& x, const std::vector<int>& y) {
  std::map<int, double> observed;
  std::map<int, double> members;
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    observed[y[i]] += x[i];
    members[y[i]] += 1.0;
    total += x[i];
  }
  if (total == 0.0) return 0.0;
  const auto n = static_cast<double>(x.size());
  double acc = 0.0;
  for (const auto& [label, o] : observed) {
    const double e = total * members[label] / n;
    acc += o * o / e;
  }
  return acc - total;
}

inline double entropy_of(const std::map<std::vector<double>, double>& counts, double n) {
  double h = 0.0;
  for (const auto& [key, c] : counts) h -= (c / n) * std::log2(c / n);
  return h;
}

/// MI in bits between raw values and labels as H(X) + H(Y) - H(X, Y).
inline double mi_oracle(const std::vector<double>& x, const std::vector<int>& y) {
  std::map<std::vector<double>, double> hx, hy, hxy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    hx[{x[i]}] += 1.0;
    hy[{static_cast<double>(y[i])}] += 1.0;
    hxy[{x[i], static_cast<double>(y[i])}] += 1.0;
  }
  const auto n = static_cast<double>(x.size());
  return entropy_of(hx, n) + entropy_of(hy, n) - entropy_of(hxy, n);
}

/// Random confusion matrix with every class present in the truths.
inline ConfusionMatrix random_confusion(Rng& rng, int classes) {
  std::vector<int> ids(static_cast<std::size_t>(classes));
  for (int c = 0; c < classes; ++c) ids[static_cast<std::size_t>(c)] = c;
  ConfusionMatrix cm(ids);
  for (int t = 0; t < classes; ++t) {
    cm.add(t, static_cast<int>(rng.below(static_cast<std::uint64_t>(classes))), 1);
    for (int p = 0; p < classes; ++p) cm.add(t, p, static_cast<long long>(rng.below(50)));
  }
  return cm;
}

}  // namespace malfam::testing

#pragma once

#include "malfam/common.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace malfam {

enum class FeatureGroup { Memory, API, Network, Battery, Logcat, Process };

std::string_view to_string(FeatureGroup group);
FeatureGroup parse_feature_group(std::string_view text);

struct FeatureDescriptor {
  std::string id;  // "F1" ... "F141"
  std::string name;
  FeatureGroup group;

  bool operator==(const FeatureDescriptor&) const = default;
};

/// Ordered feature list bound to a digest of the ordered names.
///
/// Schemas produced by projection keep the original descriptors (and so the
/// original F-ids) and carry a fingerprint that also records the mask.
class FeatureSchema {
 public:
  explicit FeatureSchema(std::vector<FeatureDescriptor> features);

  std::size_t size() const { return features_.size(); }
  const std::vector<FeatureDescriptor>& features() const { return features_; }
  const FeatureDescriptor& operator[](std::size_t i) const { return features_[i]; }
  const std::string& fingerprint() const { return fingerprint_; }
  std::optional<std::size_t> find(std::string_view name) const;
  std::optional<std::size_t> find_id(std::string_view id) const;

  /// Schema restricted to `ordinals` (ascending). The fingerprint is
  /// mask_fingerprint(fingerprint(), ordinals).
  FeatureSchema project(std::span<const std::size_t> ordinals) const;

  std::string to_json() const;

 private:
  FeatureSchema(std::vector<FeatureDescriptor> features, std::string fingerprint);

  std::vector<FeatureDescriptor> features_;
  std::string fingerprint_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

std::string mask_fingerprint(std::string_view base_fingerprint,
                             std::span<const std::size_t> ordinals);

FeatureSchema load_schema(std::string_view document);
FeatureSchema load_schema_file(const std::filesystem::path& path);

struct FamilyEntry {
  std::string name;
  int category;
};

/// Category and family names; every family belongs to one category.
/// Lookups are case-insensitive and ignore surrounding whitespace.
class LabelTaxonomy {
 public:
  LabelTaxonomy(std::vector<std::string> categories, std::vector<FamilyEntry> families);

  const std::vector<std::string>& categories() const { return categories_; }
  const std::vector<FamilyEntry>& families() const { return families_; }
  std::optional<int> category_index(std::string_view name) const;
  std::optional<int> family_index(std::string_view name) const;
  int owning_category(int family) const { return families_.at(static_cast<std::size_t>(family)).category; }
  std::size_t class_count(Task task) const;
  const std::string& label_name(Task task, int label) const;

 private:
  std::vector<std::string> categories_;
  std::vector<FamilyEntry> families_;
  std::unordered_map<std::string, int> category_lookup_;
  std::unordered_map<std::string, int> family_lookup_;
};

LabelTaxonomy load_taxonomy(std::string_view document);
LabelTaxonomy load_taxonomy_file(const std::filesystem::path& path);

struct Sample {
  std::string sample_id;
  std::vector<double> values;
  int category = 0;
  int family = 0;
};

using SchemaPtr = std::shared_ptr<const FeatureSchema>;
using TaxonomyPtr = std::shared_ptr<const LabelTaxonomy>;

/// Immutable table of labelled samples. Values may hold NaN until
/// preprocessing removes incomplete rows.
class Dataset {
 public:
  Dataset(SchemaPtr schema, TaxonomyPtr taxonomy, Matrix values, Labels categories,
          Labels families, std::vector<std::string> sample_ids = {});

  static Dataset from_samples(SchemaPtr schema, TaxonomyPtr taxonomy,
                              const std::vector<Sample>& samples);

  std::size_t size() const { return static_cast<std::size_t>(values_.rows()); }
  bool empty() const { return size() == 0; }
  std::size_t feature_count() const { return static_cast<std::size_t>(values_.cols()); }

  const FeatureSchema& schema() const { return *schema_; }
  const SchemaPtr& schema_ptr() const { return schema_; }
  const LabelTaxonomy& taxonomy() const { return *taxonomy_; }
  const TaxonomyPtr& taxonomy_ptr() const { return taxonomy_; }

  const Matrix& values() const { return values_; }
  const Labels& categories() const { return categories_; }
  const Labels& families() const { return families_; }
  const Labels& labels(Task task) const { return task == Task::category ? categories_ : families_; }
  /// Empty when the source carried no SampleId column.
  const std::vector<std::string>& sample_ids() const { return sample_ids_; }

  Sample sample(std::size_t row) const;

  Dataset select_rows(std::span<const std::size_t> rows) const;
  Dataset with_values(Matrix values) const;
  Dataset with_schema(SchemaPtr schema, Matrix values) const;

  /// Bitwise equality of values (NaN equals NaN), labels, ids and schema.
  bool operator==(const Dataset& other) const;

 private:
  SchemaPtr schema_;
  TaxonomyPtr taxonomy_;
  Matrix values_;
  Labels categories_;
  Labels families_;
  std::vector<std::string> sample_ids_;
};

/// External header -> schema name; std::nullopt drops the column.
struct ColumnMap {
  std::map<std::string, std::optional<std::string>> rename;
};

ColumnMap load_column_map(std::string_view document);

Dataset ingest_csv(std::istream& in, SchemaPtr schema, TaxonomyPtr taxonomy,
                   const ColumnMap& columns = {});
Dataset ingest_csv_file(const std::filesystem::path& path, SchemaPtr schema,
                        TaxonomyPtr taxonomy, const ColumnMap& columns = {});

/// Feature columns only; label columns, if present, are ignored.
struct FeatureTable {
  Matrix values;
  std::vector<std::string> sample_ids;  // empty without a SampleId column
};

FeatureTable ingest_features_csv(std::istream& in, const FeatureSchema& schema, const ColumnMap& columns = {});

/// Writes the canonical layout: [SampleId,] features..., Category, Family.
void write_csv(std::ostream& out, const Dataset& dataset);

struct ValidationReport {
  std::size_t samples = 0;
  std::vector<std::pair<std::string, std::size_t>> category_counts;
  std::vector<std::pair<std::string, std::size_t>> family_counts;  // nonzero only
  std::size_t categories_present = 0;
  std::size_t families_present = 0;
  std::size_t non_finite_cells = 0;
  std::size_t rows_with_non_finite = 0;
  std::size_t duplicate_rows = 0;
  bool empty = true;

  std::size_t category_count(std::string_view name) const;
  std::string to_json() const;
};

ValidationReport validate_dataset(const Dataset& dataset);

struct SyntheticSpec {
  std::size_t class_count = 14;
  std::size_t samples_per_class = 300;
  std::vector<std::string> informative_feature_ids;
  double class_separation = 2.0;
  double noise_scale = 1.0;
  std::uint64_t seed = 7;
};

/// The desk-scale benchmark: 14 classes x 300, 40 evenly spaced informative
/// features, separation 2.0, noise 1.0, seed 7.
SyntheticSpec default_synthetic_spec(const FeatureSchema& schema);

/// `count` informative ids spread evenly across the schema.
std::vector<std::string> spread_feature_ids(const FeatureSchema& schema, std::size_t count);

Dataset generate_synthetic(const SyntheticSpec& spec, SchemaPtr schema, TaxonomyPtr taxonomy);

}  // namespace malfam

#include "malfam/schema.hpp"

#include "row_key.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_set>

namespace malfam {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

json parse_json(std::string_view document, std::string_view what) {
  try {
    return json::parse(document);
  } catch (const json::exception& e) {
    throw DataError(std::string(what) + ": invalid JSON: " + e.what());
  }
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

std::string csv_escape(std::string_view text) {
  if (text.find_first_of(",\"\n") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_cell(std::string_view raw) {
  const auto text = trim(raw);
  if (text.empty() || text == "NaN" || text == "nan") return std::numeric_limits<double>::quiet_NaN();
  double value = 0.0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc() || result.ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

}  // namespace

// ---------------------------------------------------------------- schema

std::string_view to_string(FeatureGroup group) {
  switch (group) {
    case FeatureGroup::Memory: return "Memory";
    case FeatureGroup::API: return "API";
    case FeatureGroup::Network: return "Network";
    case FeatureGroup::Battery: return "Battery";
    case FeatureGroup::Logcat: return "Logcat";
    case FeatureGroup::Process: return "Process";
  }
  return "?";
}

FeatureGroup parse_feature_group(std::string_view text) {
  const auto key = to_lower_trimmed(text);
  for (auto g : {FeatureGroup::Memory, FeatureGroup::API, FeatureGroup::Network,
                 FeatureGroup::Battery, FeatureGroup::Logcat, FeatureGroup::Process}) {
    if (to_lower_trimmed(to_string(g)) == key) return g;
  }
  throw DataError("unknown feature group '" + std::string(text) + "'");
}

FeatureSchema::FeatureSchema(std::vector<FeatureDescriptor> features)
    : FeatureSchema(std::move(features), std::string()) {}

FeatureSchema::FeatureSchema(std::vector<FeatureDescriptor> features, std::string fingerprint)
    : features_(std::move(features)), fingerprint_(std::move(fingerprint)) {
  if (features_.empty()) throw DataError("schema has no features");
  std::string joined;
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const auto& name = features_[i].name;
    if (name.empty()) throw DataError("feature " + std::to_string(i + 1) + " has an empty name");
    if (!by_name_.emplace(name, i).second) throw DataError("duplicate feature name '" + name + "'");
    joined += name;
    joined.push_back('\n');
  }
  if (fingerprint_.empty()) fingerprint_ = fnv1a_hex(joined);
}

std::optional<std::size_t> FeatureSchema::find(std::string_view name) const {
  const auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> FeatureSchema::find_id(std::string_view id) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].id == id) return i;
  }
  return std::nullopt;
}

std::string mask_fingerprint(std::string_view base_fingerprint, std::span<const std::size_t> ordinals) {
  std::string text(base_fingerprint);
  text += "|mask";
  for (auto o : ordinals) text += ":" + std::to_string(o);
  return fnv1a_hex(text);
}

FeatureSchema FeatureSchema::project(std::span<const std::size_t> ordinals) const {
  std::vector<FeatureDescriptor> kept;
  kept.reserve(ordinals.size());
  for (auto o : ordinals) {
    if (o >= features_.size()) throw DataError("mask ordinal out of range");
    kept.push_back(features_[o]);
  }
  return FeatureSchema(std::move(kept), mask_fingerprint(fingerprint_, ordinals));
}

std::string FeatureSchema::to_json() const {
  json features = json::array();
  for (const auto& f : features_) {
    features.push_back({{"id", f.id}, {"name", f.name}, {"group", std::string(to_string(f.group))}});
  }
  return json{{"features", features}}.dump(2);
}

FeatureSchema load_schema(std::string_view document) {
  const auto doc = parse_json(document, "schema");
  if (!doc.is_object() || !doc.contains("features") || !doc["features"].is_array()) {
    throw DataError("schema: expected an object with a 'features' array");
  }
  const auto& items = doc["features"];
  if (items.empty()) throw DataError("schema: empty feature list");
  std::vector<FeatureDescriptor> features;
  features.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    if (!item.is_object() || !item.contains("name") || !item.contains("group")) {
      throw DataError("schema: feature " + std::to_string(i + 1) + " needs 'name' and 'group'");
    }
    const std::string expected_id = "F" + std::to_string(i + 1);
    std::string id = item.value("id", expected_id);
    if (id != expected_id) {
      throw DataError("schema: feature id '" + id + "' at position " + std::to_string(i + 1) +
                      " (expected " + expected_id + ")");
    }
    features.push_back({std::move(id), item["name"].get<std::string>(),
                        parse_feature_group(item["group"].get<std::string>())});
  }
  return FeatureSchema(std::move(features));
}

FeatureSchema load_schema_file(const std::filesystem::path& path) {
  return load_schema(read_file(path));
}

// -------------------------------------------------------------- taxonomy

LabelTaxonomy::LabelTaxonomy(std::vector<std::string> categories, std::vector<FamilyEntry> families)
    : categories_(std::move(categories)), families_(std::move(families)) {
  if (categories_.empty()) throw DataError("taxonomy has no categories");
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    if (!category_lookup_.emplace(to_lower_trimmed(categories_[i]), static_cast<int>(i)).second) {
      throw DataError("duplicate category '" + categories_[i] + "'");
    }
  }
  for (std::size_t i = 0; i < families_.size(); ++i) {
    const auto& f = families_[i];
    if (f.category < 0 || static_cast<std::size_t>(f.category) >= categories_.size()) {
      throw DataError("family '" + f.name + "' has no valid category");
    }
    if (!family_lookup_.emplace(to_lower_trimmed(f.name), static_cast<int>(i)).second) {
      throw DataError("duplicate family '" + f.name + "'");
    }
  }
}

std::optional<int> LabelTaxonomy::category_index(std::string_view name) const {
  const auto it = category_lookup_.find(to_lower_trimmed(name));
  if (it == category_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> LabelTaxonomy::family_index(std::string_view name) const {
  const auto it = family_lookup_.find(to_lower_trimmed(name));
  if (it == family_lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t LabelTaxonomy::class_count(Task task) const {
  return task == Task::category ? categories_.size() : families_.size();
}

const std::string& LabelTaxonomy::label_name(Task task, int label) const {
  const auto i = static_cast<std::size_t>(label);
  return task == Task::category ? categories_.at(i) : families_.at(i).name;
}

LabelTaxonomy load_taxonomy(std::string_view document) {
  const auto doc = parse_json(document, "taxonomy");
  if (!doc.is_object() || !doc.contains("categories") || !doc.contains("families")) {
    throw DataError("taxonomy: expected 'categories' and 'families'");
  }
  std::vector<std::string> categories = doc["categories"].get<std::vector<std::string>>();
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < categories.size(); ++i) {
    index.emplace(to_lower_trimmed(categories[i]), static_cast<int>(i));
  }
  std::vector<FamilyEntry> families;
  for (const auto& item : doc["families"]) {
    const auto name = item.at("name").get<std::string>();
    const auto category = item.at("category").get<std::string>();
    const auto it = index.find(to_lower_trimmed(category));
    if (it == index.end()) {
      throw DataError("taxonomy: family '" + name + "' names unknown category '" + category + "'");
    }
    families.push_back({name, it->second});
  }
  return LabelTaxonomy(std::move(categories), std::move(families));
}

LabelTaxonomy load_taxonomy_file(const std::filesystem::path& path) {
  return load_taxonomy(read_file(path));
}

// --------------------------------------------------------------- dataset

Dataset::Dataset(SchemaPtr schema, TaxonomyPtr taxonomy, Matrix values, Labels categories,
                 Labels families, std::vector<std::string> sample_ids)
    : schema_(std::move(schema)),
      taxonomy_(std::move(taxonomy)),
      values_(std::move(values)),
      categories_(std::move(categories)),
      families_(std::move(families)),
      sample_ids_(std::move(sample_ids)) {
  if (!schema_ || !taxonomy_) throw DataError("dataset needs a schema and a taxonomy");
  const auto n = static_cast<std::size_t>(values_.rows());
  if (static_cast<std::size_t>(values_.cols()) != schema_->size()) {
    throw DataError("dataset has " + std::to_string(values_.cols()) + " columns, schema has " +
                    std::to_string(schema_->size()));
  }
  if (categories_.size() != n || families_.size() != n) throw DataError("label count differs from row count");
  if (!sample_ids_.empty() && sample_ids_.size() != n) throw DataError("sample id count differs from row count");
  const auto family_total = taxonomy_->families().size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto fam = families_[i];
    if (fam < 0 || static_cast<std::size_t>(fam) >= family_total) throw DataError("family index out of range");
    if (taxonomy_->owning_category(fam) != categories_[i]) {
      throw DataError("row " + std::to_string(i + 1) + ": family '" + taxonomy_->families()[fam].name +
                      "' does not belong to the row's category");
    }
  }
}

Dataset Dataset::from_samples(SchemaPtr schema, TaxonomyPtr taxonomy, const std::vector<Sample>& samples) {
  const auto d = schema ? schema->size() : 0;
  Matrix values(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(d));
  Labels categories, families;
  std::vector<std::string> ids;
  bool any_id = false;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.values.size() != d) throw DataError("sample " + std::to_string(i + 1) + " has the wrong length");
    for (std::size_t j = 0; j < d; ++j) values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s.values[j];
    categories.push_back(s.category);
    families.push_back(s.family);
    ids.push_back(s.sample_id);
    any_id = any_id || !s.sample_id.empty();
  }
  if (!any_id) ids.clear();
  return Dataset(std::move(schema), std::move(taxonomy), std::move(values), std::move(categories),
                 std::move(families), std::move(ids));
}

Sample Dataset::sample(std::size_t row) const {
  Sample s;
  if (!sample_ids_.empty()) s.sample_id = sample_ids_[row];
  const auto r = static_cast<Eigen::Index>(row);
  s.values.assign(values_.row(r).begin(), values_.row(r).end());
  s.category = categories_[row];
  s.family = families_[row];
  return s;
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
  Matrix values(static_cast<Eigen::Index>(rows.size()), values_.cols());
  Labels categories, families;
  std::vector<std::string> ids;
  categories.reserve(rows.size());
  families.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    values.row(static_cast<Eigen::Index>(i)) = values_.row(static_cast<Eigen::Index>(rows[i]));
    categories.push_back(categories_[rows[i]]);
    families.push_back(families_[rows[i]]);
    if (!sample_ids_.empty()) ids.push_back(sample_ids_[rows[i]]);
  }
  return Dataset(schema_, taxonomy_, std::move(values), std::move(categories), std::move(families),
                 std::move(ids));
}

Dataset Dataset::with_values(Matrix values) const {
  return Dataset(schema_, taxonomy_, std::move(values), categories_, families_, sample_ids_);
}

Dataset Dataset::with_schema(SchemaPtr schema, Matrix values) const {
  return Dataset(std::move(schema), taxonomy_, std::move(values), categories_, families_, sample_ids_);
}

bool Dataset::operator==(const Dataset& other) const {
  if (schema_->fingerprint() != other.schema_->fingerprint()) return false;
  if (values_.rows() != other.values_.rows() || values_.cols() != other.values_.cols()) return false;
  if (categories_ != other.categories_ || families_ != other.families_ || sample_ids_ != other.sample_ids_) {
    return false;
  }
  for (Eigen::Index r = 0; r < values_.rows(); ++r) {
    if (detail::RowKey::make(values_, r, 0, 0) != detail::RowKey::make(other.values_, r, 0, 0)) return false;
  }
  return true;
}

// ------------------------------------------------------------------- CSV

ColumnMap load_column_map(std::string_view document) {
  const auto doc = parse_json(document, "column map");
  if (!doc.is_object()) throw DataError("column map: expected a JSON object");
  ColumnMap map;
  for (const auto& [external, target] : doc.items()) {
    if (target.is_null()) {
      map.rename.emplace(external, std::nullopt);
    } else if (target.is_string()) {
      map.rename.emplace(external, target.get<std::string>());
    } else {
      throw DataError("column map: value for '" + external + "' must be a string or null");
    }
  }
  return map;
}

namespace {

struct RawTable {
  Matrix values;
  std::vector<std::string> category_names;
  std::vector<std::string> family_names;
  std::vector<std::string> ids;
  bool has_labels = false;
  bool has_ids = false;
};

RawTable read_table(std::istream& in, const FeatureSchema& schema, const ColumnMap& columns, bool require_labels) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV: missing header row");

  enum Role : int { kIgnore = -1, kCategory = -2, kFamily = -3, kSampleId = -4 };
  std::vector<int> roles;
  std::vector<bool> seen(schema.size(), false);
  bool has_category = false, has_family = false, has_id = false;

  auto header = split_csv_line(line);
  if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);
  for (const auto& raw : header) {
    std::string name(trim(raw));
    if (const auto it = columns.rename.find(name); it != columns.rename.end()) {
      if (!it->second) {
        roles.push_back(kIgnore);
        continue;
      }
      name = *it->second;
    }
    const auto lowered = to_lower_trimmed(name);
    int role;
    if (lowered == "category") {
      if (has_category) throw DataError("CSV header: duplicate Category column");
      has_category = true;
      role = kCategory;
    } else if (lowered == "family") {
      if (has_family) throw DataError("CSV header: duplicate Family column");
      has_family = true;
      role = kFamily;
    } else if (lowered == "sampleid") {
      if (has_id) throw DataError("CSV header: duplicate SampleId column");
      has_id = true;
      role = kSampleId;
    } else {
      const auto ordinal = schema.find(name);
      if (!ordinal) throw DataError("CSV header: column '" + name + "' is not in the schema");
      if (seen[*ordinal]) throw DataError("CSV header: duplicate column '" + name + "'");
      seen[*ordinal] = true;
      role = static_cast<int>(*ordinal);
    }
    roles.push_back(role);
  }
  if (require_labels && (!has_category || !has_family)) {
    throw DataError("CSV header: Category and Family columns are required");
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw DataError("CSV header: missing feature column '" + schema[i].name + "'");
  }

  RawTable table;
  table.has_labels = has_category && has_family;
  table.has_ids = has_id;
  std::vector<std::vector<double>> rows;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != roles.size()) {
      throw DataError("CSV line " + std::to_string(line_number) + ": expected " + std::to_string(roles.size()) +
                      " cells, found " + std::to_string(cells.size()));
    }
    std::vector<double> values(schema.size());
    std::string category_name, family_name, id;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      switch (roles[c]) {
        case kIgnore: break;
        case kCategory: category_name = cells[c]; break;
        case kFamily: family_name = cells[c]; break;
        case kSampleId: id = std::string(trim(cells[c])); break;
        default: {
          const auto value = parse_cell(cells[c]);
          if (!value) {
            throw DataError("CSV line " + std::to_string(line_number) + ": non-numeric value '" + cells[c] +
                            "' in column '" + schema[static_cast<std::size_t>(roles[c])].name + "'");
          }
          values[static_cast<std::size_t>(roles[c])] = *value;
        }
      }
    }
    rows.push_back(std::move(values));
    table.category_names.push_back(std::move(category_name));
    table.family_names.push_back(std::move(family_name));
    table.ids.push_back(std::move(id));
  }

  table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(schema.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  if (!has_id) table.ids.clear();
  return table;
}

}  // namespace

Dataset ingest_csv(std::istream& in, SchemaPtr schema, TaxonomyPtr taxonomy, const ColumnMap& columns) {
  if (!schema || !taxonomy) throw DataError("ingest needs a schema and a taxonomy");
  auto table = read_table(in, *schema, columns, true);
  Labels categories, families;
  for (std::size_t i = 0; i < table.family_names.size(); ++i) {
    const auto& family_name = table.family_names[i];
    const auto& category_name = table.category_names[i];
    const auto row = std::to_string(i + 1);
    const auto family = taxonomy->family_index(family_name);
    if (!family) throw DataError("CSV row " + row + ": unknown family '" + family_name + "'");
    const auto category = taxonomy->category_index(category_name);
    if (!category) throw DataError("CSV row " + row + ": unknown category '" + category_name + "'");
    if (taxonomy->owning_category(*family) != *category) {
      throw DataError("CSV row " + row + ": family '" + family_name + "' does not belong to category '" +
                      category_name + "'");
    }
    categories.push_back(*category);
    families.push_back(*family);
  }
  return Dataset(std::move(schema), std::move(taxonomy), std::move(table.values), std::move(categories),
                 std::move(families), std::move(table.ids));
}

FeatureTable ingest_features_csv(std::istream& in, const FeatureSchema& schema, const ColumnMap& columns) {
  auto table = read_table(in, schema, columns, false);
  return FeatureTable{std::move(table.values), std::move(table.ids)};
}

Dataset ingest_csv_file(const std::filesystem::path& path, SchemaPtr schema, TaxonomyPtr taxonomy,
                        const ColumnMap& columns) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return ingest_csv(in, std::move(schema), std::move(taxonomy), columns);
}

void write_csv(std::ostream& out, const Dataset& dataset) {
  const bool with_ids = !dataset.sample_ids().empty();
  if (with_ids) out << "SampleId,";
  for (const auto& f : dataset.schema().features()) out << csv_escape(f.name) << ',';
  out << "Category,Family\n";
  const auto& values = dataset.values();
  const auto& taxonomy = dataset.taxonomy();
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    if (with_ids) out << csv_escape(dataset.sample_ids()[r]) << ',';
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      out << format_double(values(static_cast<Eigen::Index>(r), c)) << ',';
    }
    out << csv_escape(taxonomy.categories()[static_cast<std::size_t>(dataset.categories()[r])]) << ','
        << csv_escape(taxonomy.families()[static_cast<std::size_t>(dataset.families()[r])].name) << '\n';
  }
}

// ------------------------------------------------------------ validation

std::size_t ValidationReport::category_count(std::string_view name) const {
  const auto key = to_lower_trimmed(name);
  for (const auto& [category, count] : category_counts) {
    if (to_lower_trimmed(category) == key) return count;
  }
  return 0;
}

std::string ValidationReport::to_json() const {
  json categories = json::array();
  for (const auto& [name, count] : category_counts) categories.push_back({{"name", name}, {"count", count}});
  json families = json::array();
  for (const auto& [name, count] : family_counts) families.push_back({{"name", name}, {"count", count}});
  return json{{"samples", samples},
              {"empty", empty},
              {"categories_present", categories_present},
              {"families_present", families_present},
              {"non_finite_cells", non_finite_cells},
              {"rows_with_non_finite", rows_with_non_finite},
              {"duplicate_rows", duplicate_rows},
              {"category_counts", categories},
              {"family_counts", families}}
      .dump(2);
}

ValidationReport validate_dataset(const Dataset& dataset) {
  ValidationReport report;
  const auto& taxonomy = dataset.taxonomy();
  report.samples = dataset.size();
  report.empty = dataset.empty();

  std::vector<std::size_t> per_category(taxonomy.categories().size(), 0);
  std::vector<std::size_t> per_family(taxonomy.families().size(), 0);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    ++per_category[static_cast<std::size_t>(dataset.categories()[i])];
    ++per_family[static_cast<std::size_t>(dataset.families()[i])];
  }
  for (std::size_t c = 0; c < per_category.size(); ++c) {
    report.category_counts.emplace_back(taxonomy.categories()[c], per_category[c]);
    if (per_category[c] > 0) ++report.categories_present;
  }
  for (std::size_t f = 0; f < per_family.size(); ++f) {
    if (per_family[f] == 0) continue;
    report.family_counts.emplace_back(taxonomy.families()[f].name, per_family[f]);
    ++report.families_present;
  }

  const auto& values = dataset.values();
  std::unordered_set<detail::RowKey, detail::RowKeyHash> seen;
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    const auto bad = (!values.row(r).array().isFinite()).count();
    report.non_finite_cells += static_cast<std::size_t>(bad);
    if (bad > 0) ++report.rows_with_non_finite;
    const auto i = static_cast<std::size_t>(r);
    if (!seen.insert(detail::RowKey::make(values, r, dataset.categories()[i], dataset.families()[i])).second) {
      ++report.duplicate_rows;
    }
  }
  return report;
}

// ------------------------------------------------------------- synthetic

std::vector<std::string> spread_feature_ids(const FeatureSchema& schema, std::size_t count) {
  count = std::min(count, schema.size());
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < count; ++i) ids.push_back(schema[i * schema.size() / count].id);
  return ids;
}

SyntheticSpec default_synthetic_spec(const FeatureSchema& schema) {
  SyntheticSpec spec;
  spec.informative_feature_ids = spread_feature_ids(schema, 40);
  return spec;
}

Dataset generate_synthetic(const SyntheticSpec& spec, SchemaPtr schema, TaxonomyPtr taxonomy) {
  if (!schema || !taxonomy) throw ConfigError("synthetic generation needs a schema and a taxonomy");
  if (spec.class_count < 1 || spec.class_count > taxonomy->categories().size()) {
    throw ConfigError("synthetic class count must be in [1, " + std::to_string(taxonomy->categories().size()) + "]");
  }
  if (spec.samples_per_class < 1) throw ConfigError("synthetic samples per class must be >= 1");
  if (!(spec.noise_scale >= 0.0) || !std::isfinite(spec.class_separation)) {
    throw ConfigError("synthetic noise scale must be >= 0 and separation finite");
  }
  const auto d = schema->size();
  std::vector<bool> informative(d, false);
  for (const auto& id : spec.informative_feature_ids) {
    const auto ordinal = schema->find_id(id);
    if (!ordinal) throw ConfigError("synthetic informative id '" + id + "' is not in the schema");
    informative[*ordinal] = true;
  }

  std::vector<std::vector<int>> families_of(taxonomy->categories().size());
  for (std::size_t f = 0; f < taxonomy->families().size(); ++f) {
    families_of[static_cast<std::size_t>(taxonomy->families()[f].category)].push_back(static_cast<int>(f));
  }

  const auto n = spec.class_count * spec.samples_per_class;
  Matrix values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  Labels categories(n), families(n);
  std::vector<std::string> ids(n);
  Rng rng(spec.seed);
  std::size_t row = 0;
  for (std::size_t c = 0; c < spec.class_count; ++c) {
    const auto& fams = families_of[c];
    if (fams.empty()) throw ConfigError("category '" + taxonomy->categories()[c] + "' has no families");
    const double mean = static_cast<double>(c) * spec.class_separation;
    for (std::size_t s = 0; s < spec.samples_per_class; ++s, ++row) {
      const auto r = static_cast<Eigen::Index>(row);
      for (std::size_t j = 0; j < d; ++j) {
        const double noise = spec.noise_scale * rng.normal();
        values(r, static_cast<Eigen::Index>(j)) = informative[j] ? mean + noise : noise;
      }
      categories[row] = static_cast<int>(c);
      families[row] = fams[s % fams.size()];
      char id[24];
      std::snprintf(id, sizeof(id), "syn-%06zu", row + 1);
      ids[row] = id;
    }
  }
  // Shift every column to a zero minimum so chi2 scoring works unscaled.
  const RowVector column_min = values.colwise().minCoeff();
  values.rowwise() -= column_min;
  return Dataset(std::move(schema), std::move(taxonomy), std::move(values), std::move(categories),
                 std::move(families), std::move(ids));
}

}  // namespace malfam

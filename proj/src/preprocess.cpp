#include "malfam/preprocess.hpp"

#include "row_key.hpp"

#include <json.hpp>

#include <unordered_set>

namespace malfam {

using nlohmann::json;

std::string ScaleParams::to_json() const {
  json doc{{"schema_fingerprint", schema_fingerprint},
           {"min", std::vector<double>(min.begin(), min.end())},
           {"max", std::vector<double>(max.begin(), max.end())}};
  return doc.dump(2);
}

ScaleParams ScaleParams::from_json(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::exception& e) {
    throw DataError(std::string("scale params: invalid JSON: ") + e.what());
  }
  try {
    const auto lo = doc.at("min").get<std::vector<double>>();
    const auto hi = doc.at("max").get<std::vector<double>>();
    if (lo.size() != hi.size()) throw DataError("scale params: min/max length mismatch");
    ScaleParams params;
    params.min = Eigen::Map<const Vector>(lo.data(), static_cast<Eigen::Index>(lo.size()));
    params.max = Eigen::Map<const Vector>(hi.data(), static_cast<Eigen::Index>(hi.size()));
    params.schema_fingerprint = doc.at("schema_fingerprint").get<std::string>();
    for (Eigen::Index i = 0; i < params.min.size(); ++i) {
      if (!(params.min[i] <= params.max[i])) throw DataError("scale params: min exceeds max");
    }
    return params;
  } catch (const json::exception& e) {
    throw DataError(std::string("scale params: ") + e.what());
  }
}

Dataset drop_incomplete(const Dataset& dataset) {
  std::vector<std::size_t> keep;
  const auto& values = dataset.values();
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    if (values.row(r).allFinite()) keep.push_back(static_cast<std::size_t>(r));
  }
  if (keep.empty()) throw DataError("no complete rows remain after NaN removal");
  if (keep.size() == dataset.size()) return dataset;
  return dataset.select_rows(keep);
}

Dataset dedupe(const Dataset& dataset) {
  std::vector<std::size_t> keep;
  std::unordered_set<detail::RowKey, detail::RowKeyHash> seen;
  const auto& values = dataset.values();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    auto key = detail::RowKey::make(values, static_cast<Eigen::Index>(i), dataset.categories()[i],
                                    dataset.families()[i]);
    if (seen.insert(std::move(key)).second) keep.push_back(i);
  }
  if (keep.size() == dataset.size()) return dataset;
  return dataset.select_rows(keep);
}

ScaleParams fit_minmax(const Dataset& dataset) {
  if (dataset.empty()) throw DataError("cannot fit MinMax scaling on an empty dataset");
  if (!dataset.values().allFinite()) throw DataError("cannot fit MinMax scaling on non-finite values");
  auto [lo, hi] = column_bounds(dataset.values());
  return ScaleParams{std::move(lo), std::move(hi), dataset.schema().fingerprint()};
}

ScaledDataset apply_minmax(const Dataset& dataset, const ScaleParams& params) {
  if (params.schema_fingerprint != dataset.schema().fingerprint()) {
    throw DataError("scale params fingerprint " + params.schema_fingerprint + " does not match schema " +
                    dataset.schema().fingerprint());
  }
  if (static_cast<std::size_t>(params.min.size()) != dataset.feature_count()) {
    throw DataError("scale params length does not match the schema");
  }
  Matrix values = dataset.values();
  const auto clamped = minmax_scale_inplace(values, params.min, params.max);
  return {dataset.with_values(std::move(values)), clamped};
}

}  // namespace malfam

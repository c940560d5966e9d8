#include "malfam/model_io.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace malfam {

using nlohmann::json;

namespace {

json matrix_to_json(const Matrix& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size()) {
    throw DataError("model file: matrix shape does not match its data");
  }
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

json vector_to_json(const Vector& v) { return std::vector<double>(v.begin(), v.end()); }

Vector vector_from_json(const json& j) {
  const auto data = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(data.data(), static_cast<Eigen::Index>(data.size()));
}

json tree_to_json(const DecisionTree& tree) {
  json nodes = json::array();
  for (const auto& n : tree.nodes()) nodes.push_back(json::array({n.feature, n.threshold, n.left, n.right, n.distribution}));
  return {{"class_count", tree.class_count()}, {"nodes", nodes}};
}

DecisionTree tree_from_json(const json& j) {
  std::vector<TreeNode> nodes;
  for (const auto& item : j.at("nodes")) {
    if (!item.is_array() || item.size() != 5) throw DataError("model file: malformed tree node");
    TreeNode node;
    node.feature = item[0].get<int>();
    node.threshold = item[1].get<double>();
    node.left = item[2].get<int>();
    node.right = item[3].get<int>();
    node.distribution = item[4].get<std::vector<double>>();
    nodes.push_back(std::move(node));
  }
  return DecisionTree(std::move(nodes), j.at("class_count").get<int>());
}

json state_to_json(const ModelState& state) {
  return std::visit(
      [](const auto& s) -> json {
        using State = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<State, TreeState>) {
          return {{"tree", tree_to_json(s.tree)}};
        } else if constexpr (std::is_same_v<State, ForestState>) {
          json trees = json::array();
          for (const auto& t : s.trees) trees.push_back(tree_to_json(t));
          return {{"trees", trees}};
        } else if constexpr (std::is_same_v<State, KnnState>) {
          return {{"points", matrix_to_json(s.points)}, {"labels", s.labels}};
        } else if constexpr (std::is_same_v<State, NaiveBayesState>) {
          return {{"means", matrix_to_json(s.means)},
                  {"variances", matrix_to_json(s.variances)},
                  {"log_priors", vector_to_json(s.log_priors)}};
        } else if constexpr (std::is_same_v<State, LogisticState>) {
          return {{"weights", matrix_to_json(s.weights)}, {"bias", vector_to_json(s.bias)}};
        } else {
          json stumps = json::array();
          for (const auto& st : s.stumps) stumps.push_back(json::array({st.feature, st.threshold, st.left, st.right, st.alpha}));
          return {{"stumps", stumps}, {"fallback", s.fallback}};
        }
      },
      state);
}

ModelState state_from_json(ClassifierKind kind, const json& j) {
  switch (kind) {
    case ClassifierKind::J48:
      return TreeState{tree_from_json(j.at("tree"))};
    case ClassifierKind::RF: {
      ForestState forest;
      for (const auto& t : j.at("trees")) forest.trees.push_back(tree_from_json(t));
      return forest;
    }
    case ClassifierKind::KNN:
      return KnnState{matrix_from_json(j.at("points")), j.at("labels").get<std::vector<int>>()};
    case ClassifierKind::NB:
      return NaiveBayesState{matrix_from_json(j.at("means")), matrix_from_json(j.at("variances")),
                             vector_from_json(j.at("log_priors"))};
    case ClassifierKind::LR:
      return LogisticState{matrix_from_json(j.at("weights")), vector_from_json(j.at("bias"))};
    case ClassifierKind::AB: {
      BoostState boost;
      boost.fallback = j.at("fallback").get<int>();
      for (const auto& st : j.at("stumps")) {
        if (!st.is_array() || st.size() != 5) throw DataError("model file: malformed stump");
        boost.stumps.push_back({st[0].get<int>(), st[1].get<double>(), st[2].get<int>(), st[3].get<int>(),
                                st[4].get<double>()});
      }
      return boost;
    }
  }
  throw DataError("model file: unknown classifier kind");
}

}  // namespace

std::string model_to_json(const TrainedModel& model) {
  json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["spec"] = {{"kind", std::string(to_string(model.spec.kind))},
                 {"hyperparameters", model.spec.hyperparameters},
                 {"seed", model.spec.seed}};
  doc["schema_fingerprint"] = model.schema_fingerprint;
  doc["class_list"] = model.classes;
  doc["feature_count"] = model.feature_count;
  if (model.task) doc["task"] = std::string(to_string(*model.task));
  if (model.scaling) doc["scaling"] = json::parse(model.scaling->to_json());
  if (model.mask) {
    doc["feature_mask"] = {{"selected", model.mask->selected},
                           {"method", std::string(to_string(model.mask->method))},
                           {"threshold_percent", model.mask->threshold_percent}};
  }
  doc["state"] = state_to_json(model.state);
  return doc.dump();
}

TrainedModel model_from_json(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::exception& e) {
    throw DataError(std::string("model file: invalid JSON: ") + e.what());
  }
  try {
    const auto version = doc.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw DataError("model file: unsupported format_version " + std::to_string(version) + " (expected " +
                      std::to_string(kModelFormatVersion) + ")");
    }
    const auto& spec = doc.at("spec");
    TrainedModel model;
    model.spec = make_spec(parse_classifier_kind(spec.at("kind").get<std::string>()),
                           spec.at("hyperparameters").get<Hyperparameters>(), spec.at("seed").get<std::uint64_t>());
    model.schema_fingerprint = doc.at("schema_fingerprint").get<std::string>();
    model.classes = doc.at("class_list").get<std::vector<int>>();
    model.feature_count = doc.at("feature_count").get<std::size_t>();
    if (model.classes.empty()) throw DataError("model file: empty class list");
    if (doc.contains("task")) model.task = parse_task(doc["task"].get<std::string>());
    if (doc.contains("scaling")) model.scaling = ScaleParams::from_json(doc["scaling"].dump());
    if (doc.contains("feature_mask")) {
      const auto& m = doc["feature_mask"];
      model.mask = FeatureMask{m.at("selected").get<std::vector<std::size_t>>(),
                               parse_selection_method(m.at("method").get<std::string>()),
                               m.at("threshold_percent").get<int>()};
    }
    model.state = state_from_json(model.spec.kind, doc.at("state"));
    return model;
  } catch (const json::exception& e) {
    throw DataError(std::string("model file: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << model_to_json(model) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return model_from_json(buffer.str());
}

}  // namespace malfam

#pragma once

#include "malfam/feature_selection.hpp"
#include "malfam/preprocess.hpp"
#include "malfam/tree.hpp"

#include <map>
#include <optional>
#include <variant>

namespace malfam {

enum class ClassifierKind { J48, RF, KNN, NB, LR, AB };

std::string_view to_string(ClassifierKind kind);
ClassifierKind parse_classifier_kind(std::string_view text);

using Hyperparameters = std::map<std::string, double>;

/// Every tunable, with its default. Unknown names are rejected by make_spec.
///
///   J48: max_depth 0 (unlimited), min_samples_split 2, min_samples_leaf 1
///   RF:  n_trees 100, max_depth 0, min_samples_split 2, min_samples_leaf 1,
///        max_features 0 (floor(sqrt(d))), bootstrap 1
///   KNN: k 5
///   NB:  var_smoothing 1e-9 (times the largest feature variance)
///   LR:  l2 1e-4, learning_rate 0.1, max_iter 500, tol 1e-6
///   AB:  n_rounds 100, learning_rate 1.0
const Hyperparameters& default_hyperparameters(ClassifierKind kind);

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::RF;
  Hyperparameters hyperparameters;  // always complete after make_spec
  std::uint64_t seed = 0;

  double param(const std::string& name) const { return hyperparameters.at(name); }
  bool operator==(const ClassifierSpec&) const = default;
};

/// Fills defaults and validates names and ranges; throws ConfigError.
ClassifierSpec make_spec(ClassifierKind kind, const Hyperparameters& overrides = {}, std::uint64_t seed = 0);

struct TreeState {
  DecisionTree tree;
};

struct ForestState {
  std::vector<DecisionTree> trees;
};

struct KnnState {
  Matrix points;
  std::vector<int> labels;  // dense
};

struct NaiveBayesState {
  Matrix means;      // classes x features
  Matrix variances;  // smoothed
  Vector log_priors;
};

struct LogisticState {
  Matrix weights;  // features x classes
  Vector bias;
};

struct Stump {
  int feature = -1;  // -1: constant prediction `left`
  double threshold = 0.0;
  int left = 0;
  int right = 0;
  double alpha = 0.0;

  bool operator==(const Stump&) const = default;
};

struct BoostState {
  std::vector<Stump> stumps;
  int fallback = 0;  // majority class, used when no stump was kept
};

using ModelState = std::variant<TreeState, ForestState, KnnState, NaiveBayesState, LogisticState, BoostState>;

/// A fitted classifier. `classes` holds the taxonomy label ids seen in
/// training in ascending order; learned state refers to positions in it.
///
/// When the model was trained behind scaling and/or a feature mask, those
/// are kept so raw rows of the base schema can be scored directly.
struct TrainedModel {
  ClassifierSpec spec;
  std::string schema_fingerprint;
  std::vector<int> classes;
  std::size_t feature_count = 0;
  ModelState state;
  double train_seconds = 0.0;

  std::optional<Task> task;
  std::optional<ScaleParams> scaling;
  std::optional<FeatureMask> mask;
};

TrainedModel fit(const ClassifierSpec& spec, const Eigen::Ref<const Matrix>& x, std::span<const int> labels,
                 std::string schema_fingerprint = {});
TrainedModel fit(const ClassifierSpec& spec, const Dataset& dataset, Task task);

/// Labels for rows already in the model's feature space.
Labels predict_matrix(const TrainedModel& model, const Eigen::Ref<const Matrix>& x);

/// Checks `schema_fingerprint` against the model, or against the scaling
/// fingerprint when the model carries an inference pipeline.
Labels predict_batch(const TrainedModel& model, const Eigen::Ref<const Matrix>& x,
                     std::string_view schema_fingerprint);
Labels predict_batch(const TrainedModel& model, const Dataset& dataset);

// ---- algorithm entry points, exposed for tests --------------------------

struct BoostTrace {
  std::vector<double> errors;       // weighted error of each fitted stump
  std::vector<double> weight_sums;  // sample-weight total after each update
};

/// SAMME over weighted-error stumps; dense labels in [0, class_count).
BoostState boost_stumps(const Eigen::Ref<const Matrix>& x, std::span<const int> labels, int class_count,
                        int rounds, double learning_rate, BoostTrace* trace = nullptr);

/// Stump minimizing weighted misclassification. Ties: smaller feature, then
/// smaller threshold; leaf classes break ties toward the lower index.
Stump fit_stump(const Eigen::Ref<const Matrix>& x, std::span<const int> labels, int class_count,
                std::span<const double> weights);

int predict_stump(const Stump& stump, const Eigen::Ref<const RowVector>& row);

}  // namespace malfam

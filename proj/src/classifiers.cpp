#include "malfam/classifiers.hpp"

#include "malfam/logistic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

namespace malfam {

namespace {

int argmax_lowest(const Eigen::Ref<const Vector>& scores) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return static_cast<int>(best);
}

bool is_integer(double v) { return std::isfinite(v) && v == std::floor(v); }

void require(bool ok, ClassifierKind kind, const std::string& name, const char* rule) {
  if (!ok) throw ConfigError(std::string(to_string(kind)) + " hyperparameter '" + name + "' must be " + rule);
}

struct DenseTargets {
  std::vector<int> classes;  // sorted label ids
  std::vector<int> index;    // dense index per sample
};

DenseTargets densify(std::span<const int> labels) {
  DenseTargets out;
  out.classes.assign(labels.begin(), labels.end());
  std::sort(out.classes.begin(), out.classes.end());
  out.classes.erase(std::unique(out.classes.begin(), out.classes.end()), out.classes.end());
  out.index.reserve(labels.size());
  for (int label : labels) {
    out.index.push_back(static_cast<int>(std::lower_bound(out.classes.begin(), out.classes.end(), label) -
                                         out.classes.begin()));
  }
  return out;
}

TreeParams tree_params(const ClassifierSpec& spec, SplitCriterion criterion, std::size_t max_features) {
  TreeParams params;
  params.criterion = criterion;
  params.max_depth = static_cast<int>(spec.param("max_depth"));
  params.min_samples_split = static_cast<std::size_t>(spec.param("min_samples_split"));
  params.min_samples_leaf = static_cast<std::size_t>(spec.param("min_samples_leaf"));
  params.max_features = max_features;
  return params;
}

ForestState fit_forest(const ClassifierSpec& spec, const Eigen::Ref<const Matrix>& x, std::span<const int> labels,
                       int class_count) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto d = static_cast<std::size_t>(x.cols());
  auto max_features = static_cast<std::size_t>(spec.param("max_features"));
  if (max_features == 0) max_features = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d))));
  max_features = std::min(max_features, d);
  const auto params = tree_params(spec, SplitCriterion::gini, max_features);
  const bool bootstrap = spec.param("bootstrap") != 0.0;
  const auto trees = static_cast<std::size_t>(spec.param("n_trees"));

  const auto ranks = rank_columns(x);
  ForestState forest;
  forest.trees.reserve(trees);
  std::vector<std::size_t> rows(n);
  for (std::size_t t = 0; t < trees; ++t) {
    Rng rng(spec.seed + t);
    if (bootstrap) {
      for (auto& r : rows) r = static_cast<std::size_t>(rng.below(n));
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    forest.trees.push_back(grow_tree(x, labels, class_count, rows, params, &rng, &ranks));
  }
  return forest;
}

NaiveBayesState fit_naive_bayes(const ClassifierSpec& spec, const Eigen::Ref<const Matrix>& x,
                                std::span<const int> labels, int class_count) {
  const auto d = x.cols();
  NaiveBayesState state;
  state.means = Matrix::Zero(class_count, d);
  state.variances = Matrix::Zero(class_count, d);
  state.log_priors = Vector::Zero(class_count);
  Vector counts = Vector::Zero(class_count);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const auto c = labels[static_cast<std::size_t>(r)];
    state.means.row(c) += x.row(r);
    counts[c] += 1.0;
  }
  state.means.array().colwise() /= counts.array();
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const auto c = labels[static_cast<std::size_t>(r)];
    state.variances.row(c).array() += (x.row(r) - state.means.row(c)).array().square();
  }
  state.variances.array().colwise() /= counts.array();

  const RowVector mean_all = x.colwise().mean();
  const double largest = (x.rowwise() - mean_all).array().square().colwise().mean().maxCoeff();
  const double epsilon = spec.param("var_smoothing") * (largest > 0.0 ? largest : 1.0);
  state.variances.array() += epsilon;
  state.log_priors = (counts.array() / static_cast<double>(x.rows())).log();
  return state;
}

LogisticState fit_logistic(const ClassifierSpec& spec, const Eigen::Ref<const Matrix>& x, std::span<const int> labels,
                           int class_count) {
  const double l2 = spec.param("l2");
  const double rate = spec.param("learning_rate");
  const auto max_iter = static_cast<int>(spec.param("max_iter"));
  const double tol = spec.param("tol");
  LogisticState state{Matrix::Zero(x.cols(), class_count), Vector::Zero(class_count)};
  Matrix grad_w;
  Vector grad_b;
  for (int it = 0; it < max_iter; ++it) {
    logistic_gradient<double>(x, labels, state.weights, state.bias, l2, grad_w, grad_b);
    state.weights -= rate * grad_w;
    state.bias -= rate * grad_b;
    const double step = rate * std::max(grad_w.size() ? grad_w.cwiseAbs().maxCoeff() : 0.0,
                                        grad_b.cwiseAbs().maxCoeff());
    if (step < tol) break;
  }
  return state;
}

/// Indices sorted by value, one order per feature.
std::vector<std::vector<std::size_t>> sorted_orders(const Eigen::Ref<const Matrix>& x) {
  std::vector<std::vector<std::size_t>> orders(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    auto& order = orders[static_cast<std::size_t>(f)];
    order.resize(static_cast<std::size_t>(x.rows()));
    std::iota(order.begin(), order.end(), std::size_t{0});
    const double* column = x.col(f).data();
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return column[a] < column[b]; });
  }
  return orders;
}

Stump fit_stump_sorted(const Eigen::Ref<const Matrix>& x, std::span<const int> labels, int class_count,
                       std::span<const double> weights, const std::vector<std::vector<std::size_t>>& orders) {
  const auto classes = static_cast<std::size_t>(class_count);
  std::vector<double> totals(classes, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) totals[static_cast<std::size_t>(labels[i])] += weights[i];
  const double total = std::accumulate(totals.begin(), totals.end(), 0.0);
  const auto majority = static_cast<int>(std::max_element(totals.begin(), totals.end()) - totals.begin());

  Stump best{-1, 0.0, majority, majority, 0.0};
  double best_error = total - totals[static_cast<std::size_t>(majority)];

  std::vector<double> left(classes);
  for (std::size_t f = 0; f < orders.size(); ++f) {
    const auto& order = orders[f];
    const double* column = x.col(static_cast<Eigen::Index>(f)).data();
    std::fill(left.begin(), left.end(), 0.0);
    std::size_t left_best = 0;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      const auto r = order[i];
      const auto c = static_cast<std::size_t>(labels[r]);
      left[c] += weights[r];
      if (left[c] > left[left_best] || (left[c] == left[left_best] && c < left_best)) left_best = c;
      const double value = column[r];
      const double next = column[order[i + 1]];
      if (!(value < next)) continue;
      std::size_t right_best = 0;
      double right_max = -1.0;
      for (std::size_t k = 0; k < classes; ++k) {
        const double w = totals[k] - left[k];
        if (w > right_max) {
          right_max = w;
          right_best = k;
        }
      }
      const double error = total - left[left_best] - right_max;
      if (error < best_error - 1e-15 * total) {
        best_error = error;
        const double mid = value + (next - value) / 2.0;
        best = Stump{static_cast<int>(f), (mid > value && mid < next) ? mid : value, static_cast<int>(left_best),
                     static_cast<int>(right_best), 0.0};
      }
    }
  }
  return best;
}

Labels to_label_ids(const TrainedModel& model, const std::vector<int>& dense) {
  Labels out;
  out.reserve(dense.size());
  for (int c : dense) out.push_back(model.classes[static_cast<std::size_t>(c)]);
  return out;
}

}  // namespace

std::string_view to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::J48: return "J48";
    case ClassifierKind::RF: return "RF";
    case ClassifierKind::KNN: return "KNN";
    case ClassifierKind::NB: return "NB";
    case ClassifierKind::LR: return "LR";
    case ClassifierKind::AB: return "AB";
  }
  return "?";
}

ClassifierKind parse_classifier_kind(std::string_view text) {
  const auto key = to_lower_trimmed(text);
  for (auto kind : {ClassifierKind::J48, ClassifierKind::RF, ClassifierKind::KNN, ClassifierKind::NB,
                    ClassifierKind::LR, ClassifierKind::AB}) {
    if (to_lower_trimmed(to_string(kind)) == key) return kind;
  }
  throw ConfigError("unknown classifier '" + std::string(text) + "' (expected J48, RF, KNN, NB, LR or AB)");
}

const Hyperparameters& default_hyperparameters(ClassifierKind kind) {
  static const std::map<ClassifierKind, Hyperparameters> defaults{
      {ClassifierKind::J48, {{"max_depth", 0}, {"min_samples_split", 2}, {"min_samples_leaf", 1}}},
      {ClassifierKind::RF,
       {{"n_trees", 100},
        {"max_depth", 0},
        {"min_samples_split", 2},
        {"min_samples_leaf", 1},
        {"max_features", 0},
        {"bootstrap", 1}}},
      {ClassifierKind::KNN, {{"k", 5}}},
      {ClassifierKind::NB, {{"var_smoothing", 1e-9}}},
      {ClassifierKind::LR, {{"l2", 1e-4}, {"learning_rate", 0.1}, {"max_iter", 500}, {"tol", 1e-6}}},
      {ClassifierKind::AB, {{"n_rounds", 100}, {"learning_rate", 1.0}}},
  };
  return defaults.at(kind);
}

ClassifierSpec make_spec(ClassifierKind kind, const Hyperparameters& overrides, std::uint64_t seed) {
  ClassifierSpec spec{kind, default_hyperparameters(kind), seed};
  for (const auto& [name, value] : overrides) {
    const auto it = spec.hyperparameters.find(name);
    if (it == spec.hyperparameters.end()) {
      throw ConfigError("unknown " + std::string(to_string(kind)) + " hyperparameter '" + name + "'");
    }
    it->second = value;
  }
  for (const auto& [name, v] : spec.hyperparameters) {
    if (name == "max_depth" || name == "max_features") {
      require(is_integer(v) && v >= 0, kind, name, "a nonnegative integer");
    } else if (name == "min_samples_split") {
      require(is_integer(v) && v >= 2, kind, name, "an integer >= 2");
    } else if (name == "min_samples_leaf" || name == "n_trees" || name == "k" || name == "max_iter" ||
               name == "n_rounds") {
      require(is_integer(v) && v >= 1, kind, name, "a positive integer");
    } else if (name == "bootstrap") {
      require(v == 0.0 || v == 1.0, kind, name, "0 or 1");
    } else if (name == "l2") {
      require(std::isfinite(v) && v >= 0.0, kind, name, "nonnegative");
    } else {
      require(std::isfinite(v) && v > 0.0, kind, name, "positive");
    }
  }
  return spec;
}

TrainedModel fit(const ClassifierSpec& raw_spec, const Eigen::Ref<const Matrix>& x, std::span<const int> labels,
                 std::string schema_fingerprint) {
  const auto spec = make_spec(raw_spec.kind, raw_spec.hyperparameters, raw_spec.seed);
  if (x.rows() == 0) throw DataError("cannot fit a classifier on an empty dataset");
  if (static_cast<std::size_t>(x.rows()) != labels.size()) throw DataError("label count differs from row count");
  if (!x.allFinite()) throw DataError("training data contains non-finite values");

  const auto start = std::chrono::steady_clock::now();
  const auto targets = densify(labels);
  const auto class_count = static_cast<int>(targets.classes.size());
  const std::span<const int> dense(targets.index);

  TrainedModel model;
  model.spec = spec;
  model.schema_fingerprint = std::move(schema_fingerprint);
  model.classes = targets.classes;
  model.feature_count = static_cast<std::size_t>(x.cols());

  switch (spec.kind) {
    case ClassifierKind::J48: {
      std::vector<std::size_t> rows(static_cast<std::size_t>(x.rows()));
      std::iota(rows.begin(), rows.end(), std::size_t{0});
      model.state = TreeState{grow_tree(x, dense, class_count, std::move(rows),
                                        tree_params(spec, SplitCriterion::gain_ratio, 0))};
      break;
    }
    case ClassifierKind::RF:
      model.state = fit_forest(spec, x, dense, class_count);
      break;
    case ClassifierKind::KNN:
      model.state = KnnState{x, targets.index};
      break;
    case ClassifierKind::NB:
      model.state = fit_naive_bayes(spec, x, dense, class_count);
      break;
    case ClassifierKind::LR:
      model.state = fit_logistic(spec, x, dense, class_count);
      break;
    case ClassifierKind::AB:
      model.state = boost_stumps(x, dense, class_count, static_cast<int>(spec.param("n_rounds")),
                                 spec.param("learning_rate"));
      break;
  }
  model.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return model;
}

TrainedModel fit(const ClassifierSpec& spec, const Dataset& dataset, Task task) {
  auto model = fit(spec, dataset.values(), dataset.labels(task), dataset.schema().fingerprint());
  model.task = task;
  return model;
}

Labels predict_matrix(const TrainedModel& model, const Eigen::Ref<const Matrix>& x) {
  if (static_cast<std::size_t>(x.cols()) != model.feature_count) {
    throw DataError("model expects " + std::to_string(model.feature_count) + " features, got " +
                    std::to_string(x.cols()));
  }
  if (!x.allFinite()) throw DataError("prediction input contains non-finite values");
  const auto n = static_cast<std::size_t>(x.rows());
  const auto class_count = static_cast<Eigen::Index>(model.classes.size());
  std::vector<int> dense(n, 0);

  std::visit(
      [&](const auto& state) {
        using State = std::decay_t<decltype(state)>;
        if constexpr (std::is_same_v<State, TreeState>) {
          for (std::size_t i = 0; i < n; ++i) dense[i] = state.tree.predict(x.row(static_cast<Eigen::Index>(i)));
        } else if constexpr (std::is_same_v<State, ForestState>) {
          Vector votes(class_count);
          for (std::size_t i = 0; i < n; ++i) {
            votes.setZero();
            for (const auto& tree : state.trees) votes[tree.predict(x.row(static_cast<Eigen::Index>(i)))] += 1.0;
            dense[i] = argmax_lowest(votes);
          }
        } else if constexpr (std::is_same_v<State, KnnState>) {
          const auto points = static_cast<std::size_t>(state.points.rows());
          const auto k = std::min<std::size_t>(static_cast<std::size_t>(model.spec.param("k")), points);
          std::vector<std::size_t> order(points);
          Vector votes(class_count);
          for (std::size_t i = 0; i < n; ++i) {
            const Vector dist =
                (state.points.rowwise() - x.row(static_cast<Eigen::Index>(i))).rowwise().squaredNorm();
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                              [&](std::size_t a, std::size_t b) {
                                const auto da = dist[static_cast<Eigen::Index>(a)];
                                const auto db = dist[static_cast<Eigen::Index>(b)];
                                return da < db || (da == db && a < b);
                              });
            votes.setZero();
            for (std::size_t j = 0; j < k; ++j) votes[state.labels[order[j]]] += 1.0;
            dense[i] = argmax_lowest(votes);
          }
        } else if constexpr (std::is_same_v<State, NaiveBayesState>) {
          Matrix joint(x.rows(), class_count);
          for (Eigen::Index c = 0; c < class_count; ++c) {
            const RowVector var = state.variances.row(c);
            const double log_norm = -0.5 * (2.0 * std::numbers::pi * var.array()).log().sum();
            joint.col(c) = ((x.rowwise() - state.means.row(c)).array().square().rowwise() / var.array())
                               .rowwise()
                               .sum()
                               .matrix() *
                           -0.5;
            joint.col(c).array() += log_norm + state.log_priors[c];
          }
          for (std::size_t i = 0; i < n; ++i) dense[i] = argmax_lowest(joint.row(static_cast<Eigen::Index>(i)).transpose());
        } else if constexpr (std::is_same_v<State, LogisticState>) {
          const Matrix logits = (x * state.weights).rowwise() + state.bias.transpose();
          for (std::size_t i = 0; i < n; ++i) dense[i] = argmax_lowest(logits.row(static_cast<Eigen::Index>(i)).transpose());
        } else if constexpr (std::is_same_v<State, BoostState>) {
          Vector scores(class_count);
          for (std::size_t i = 0; i < n; ++i) {
            if (state.stumps.empty()) {
              dense[i] = state.fallback;
              continue;
            }
            scores.setZero();
            const RowVector row = x.row(static_cast<Eigen::Index>(i));
            for (const auto& stump : state.stumps) scores[predict_stump(stump, row)] += stump.alpha;
            dense[i] = argmax_lowest(scores);
          }
        }
      },
      model.state);
  return to_label_ids(model, dense);
}

Labels predict_batch(const TrainedModel& model, const Eigen::Ref<const Matrix>& x, std::string_view fingerprint) {
  if (!model.scaling && !model.mask) {
    if (fingerprint != model.schema_fingerprint) {
      throw DataError("schema fingerprint " + std::string(fingerprint) + " does not match model fingerprint " +
                      model.schema_fingerprint);
    }
    return predict_matrix(model, x);
  }
  // Pipeline model: input is raw rows of the base schema.
  const bool base_matches =
      model.scaling ? fingerprint == model.scaling->schema_fingerprint
                    : mask_fingerprint(fingerprint, model.mask->selected) == model.schema_fingerprint;
  if (!base_matches) {
    throw DataError("schema fingerprint " + std::string(fingerprint) + " does not match the model's input schema");
  }
  if (!x.allFinite()) throw DataError("prediction input contains non-finite values");
  Matrix transformed = x;
  if (model.scaling) {
    if (model.scaling->min.size() != transformed.cols()) throw DataError("scaling length does not match input");
    minmax_scale_inplace(transformed, model.scaling->min, model.scaling->max);
  }
  if (model.mask) transformed = project_columns(transformed, *model.mask);
  return predict_matrix(model, transformed);
}

Labels predict_batch(const TrainedModel& model, const Dataset& dataset) {
  return predict_batch(model, dataset.values(), dataset.schema().fingerprint());
}

Stump fit_stump(const Eigen::Ref<const Matrix>& x, std::span<const int> labels, int class_count,
                std::span<const double> weights) {
  if (static_cast<std::size_t>(x.rows()) != labels.size() || labels.size() != weights.size()) {
    throw DataError("stump: rows, labels and weights differ in length");
  }
  return fit_stump_sorted(x, labels, class_count, weights, sorted_orders(x));
}

int predict_stump(const Stump& stump, const Eigen::Ref<const RowVector>& row) {
  if (stump.feature < 0) return stump.left;
  return row[stump.feature] <= stump.threshold ? stump.left : stump.right;
}

BoostState boost_stumps(const Eigen::Ref<const Matrix>& x, std::span<const int> labels, int class_count,
                        int rounds, double learning_rate, BoostTrace* trace) {
  const auto n = static_cast<std::size_t>(x.rows());
  BoostState state;
  {
    std::vector<std::size_t> counts(static_cast<std::size_t>(class_count), 0);
    for (int c : labels) ++counts[static_cast<std::size_t>(c)];
    state.fallback = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  }
  const auto orders = sorted_orders(x);
  std::vector<double> weights(n, 1.0 / static_cast<double>(n));
  std::vector<bool> miss(n);
  const double give_up = 1.0 - 1.0 / static_cast<double>(class_count);

  for (int round = 0; round < rounds; ++round) {
    auto stump = fit_stump_sorted(x, labels, class_count, weights, orders);
    double wrong = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const int predicted =
          stump.feature < 0 ? stump.left
                            : (x(static_cast<Eigen::Index>(i), stump.feature) <= stump.threshold ? stump.left : stump.right);
      miss[i] = predicted != labels[i];
      if (miss[i]) wrong += weights[i];
      total += weights[i];
    }
    const double error = wrong / total;
    if (error <= 0.0) {
      stump.alpha = learning_rate;
      state.stumps.push_back(stump);
      if (trace) {
        trace->errors.push_back(error);
        trace->weight_sums.push_back(total);
      }
      break;
    }
    if (error >= give_up) break;
    stump.alpha = learning_rate * (std::log((1.0 - error) / error) + std::log(static_cast<double>(class_count) - 1.0));
    const double boost = std::exp(stump.alpha);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (miss[i]) weights[i] *= boost;
      sum += weights[i];
    }
    double normalized = 0.0;
    for (auto& w : weights) {
      w /= sum;
      normalized += w;
    }
    state.stumps.push_back(stump);
    if (trace) {
      trace->errors.push_back(error);
      trace->weight_sums.push_back(normalized);
    }
  }
  return state;
}

}  // namespace malfam

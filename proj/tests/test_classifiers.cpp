#include "support.hpp"

#include "malfam/logistic.hpp"
#include "malfam/model_io.hpp"

#include <doctest.h>

#include <filesystem>
#include <numeric>

using namespace malfam;
using namespace malfam::testing;

namespace {

constexpr ClassifierKind kAllKinds[] = {ClassifierKind::J48, ClassifierKind::RF, ClassifierKind::KNN,
                                        ClassifierKind::NB,  ClassifierKind::LR, ClassifierKind::AB};

struct Blobs {
  Matrix x;
  Labels y;
};

/// Gaussian blobs around class-specific centers, labels 0..classes-1.
Blobs blobs(std::uint64_t seed, Eigen::Index n, Eigen::Index d, int classes, double spread = 0.5) {
  Rng rng(seed);
  Blobs b{Matrix(n, d), Labels(static_cast<std::size_t>(n))};
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % classes);
    b.y[static_cast<std::size_t>(i)] = c;
    for (Eigen::Index j = 0; j < d; ++j) b.x(i, j) = (j % classes == c ? 1.0 : 0.0) + spread * rng.normal();
  }
  return b;
}

double training_accuracy(const TrainedModel& model, const Matrix& x, const Labels& y) {
  const auto p = predict_matrix(model, x);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hits += p[i] == y[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

}  // namespace

TEST_SUITE("classifiers") {

TEST_CASE("impurity examples") {
  CHECK(impurity(Eigen::Vector2d(4, 4), ImpurityKind::entropy_bits) == 1.0);
  CHECK(impurity(Eigen::Vector2d(8, 0), ImpurityKind::entropy_bits) == 0.0);
  CHECK(impurity(Eigen::Vector2d(5, 5), ImpurityKind::gini) == 0.5);
  CHECK_THROWS_AS(impurity(Eigen::Vector2d(0, 0), ImpurityKind::gini), DataError);
}

TEST_CASE("best split examples") {
  const std::vector<double> x{1, 2, 10, 11};
  const std::vector<int> y{0, 0, 1, 1};
  const auto split = best_split(x, y, 2, SplitCriterion::gain_ratio);
  REQUIRE(split.has_value());
  CHECK(split->threshold == 6.0);
  CHECK(split->criterion == doctest::Approx(1.0).epsilon(1e-15));
  const std::vector<double> constant{3, 3, 3, 3};
  CHECK_FALSE(best_split(constant, y, 2, SplitCriterion::gain_ratio).has_value());
  const std::vector<int> pure{1, 1, 1, 1};
  CHECK_FALSE(best_split(x, pure, 2, SplitCriterion::gini).has_value());
}

TEST_CASE("single-class data predicts that class") {
  const auto b = blobs(1, 12, 3, 1);
  Labels y(12, 42);
  for (const auto kind : kAllKinds) {
    CAPTURE(to_string(kind));
    const auto model = fit(make_spec(kind), b.x, y);
    const auto p = predict_matrix(model, Matrix::Random(5, 3));
    CHECK(std::all_of(p.begin(), p.end(), [](int v) { return v == 42; }));
  }
}

TEST_CASE("J48 memorizes conflict-free data") {
  const auto b = blobs(2, 120, 4, 3, 1.5);
  const auto model = fit(make_spec(ClassifierKind::J48), b.x, b.y);
  CHECK(training_accuracy(model, b.x, b.y) == 1.0);
}

TEST_CASE("naive Bayes closed-form example") {
  Matrix x(4, 1);
  x << 0.0, 0.1, 1.0, 1.1;
  const Labels y{0, 0, 1, 1};
  const auto model = fit(make_spec(ClassifierKind::NB), x, y);
  Matrix q(1, 1);
  q << 0.05;
  CHECK(predict_matrix(model, q)[0] == 0);
  const auto& state = std::get<NaiveBayesState>(model.state);
  CHECK((state.variances.array() > 0.0).all());

  const auto flat = fit(make_spec(ClassifierKind::NB), Matrix::Ones(4, 2), y);
  CHECK((std::get<NaiveBayesState>(flat.state).variances.array() > 0.0).all());
}

TEST_CASE("KNN with k=1 returns the matching point's label") {
  const auto b = blobs(3, 30, 3, 3);
  const auto model = fit(make_spec(ClassifierKind::KNN, {{"k", 1}}), b.x, b.y);
  CHECK(training_accuracy(model, b.x, b.y) == 1.0);
}

TEST_CASE("random forest is deterministic") {
  const auto b = blobs(4, 90, 6, 3, 1.0);
  const auto spec = make_spec(ClassifierKind::RF, {}, 7);
  const auto a = fit(spec, b.x, b.y);
  const auto c = fit(spec, b.x, b.y);
  const Matrix q = Matrix::Random(50, 6);
  CHECK(predict_matrix(a, q) == predict_matrix(c, q));
  CHECK(model_to_json(a) == model_to_json(c));
}

TEST_CASE("one-tree forest without bagging equals a Gini tree") {
  const auto b = blobs(5, 80, 5, 3, 1.0);
  const auto forest = fit(make_spec(ClassifierKind::RF, {{"n_trees", 1}, {"bootstrap", 0}, {"max_features", 5}}),
                          b.x, b.y);
  std::vector<std::size_t> rows(80);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  TreeParams params;
  params.criterion = SplitCriterion::gini;
  const auto tree = grow_tree(b.x, b.y, 3, rows, params);
  CHECK(std::get<ForestState>(forest.state).trees.at(0) == tree);
  const Matrix q = Matrix::Random(40, 5);
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    CHECK(predict_matrix(forest, q.row(i))[0] == tree.predict(q.row(i)));
  }
}

TEST_CASE("logistic regression separates a 1-D toy") {
  Matrix x(40, 1);
  Labels y(40);
  for (Eigen::Index i = 0; i < 40; ++i) {
    x(i, 0) = i < 20 ? 0.0 : 1.0;
    y[static_cast<std::size_t>(i)] = i < 20 ? 0 : 1;
  }
  const auto model = fit(make_spec(ClassifierKind::LR), x, y);
  CHECK(training_accuracy(model, x, y) == 1.0);
}

TEST_CASE("logistic gradient matches finite differences") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto n = static_cast<Eigen::Index>(2 + rng.below(29));
    const auto d = static_cast<Eigen::Index>(1 + rng.below(5));
    const auto c = static_cast<Eigen::Index>(2 + rng.below(2));
    Matrix x(n, d), w(d, c);
    Vector bias(c);
    Labels y(static_cast<std::size_t>(n));
    for (auto& v : x.reshaped()) v = rng.normal();
    for (auto& v : w.reshaped()) v = rng.normal();
    for (auto& v : bias) v = rng.normal();
    for (auto& v : y) v = static_cast<int>(rng.below(static_cast<std::uint64_t>(c)));
    const double l2 = 0.1;
    Matrix gw;
    Vector gb;
    logistic_gradient<double>(x, y, w, bias, l2, gw, gb);
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      Matrix up = w, down = w;
      up.reshaped()(i) += h;
      down.reshaped()(i) -= h;
      const double numeric = (logistic_objective<double>(x, y, up, bias, l2) -
                              logistic_objective<double>(x, y, down, bias, l2)) / (2 * h);
      CHECK(std::abs(numeric - gw.reshaped()(i)) <= 1e-4 * std::max(1.0, std::abs(numeric)));
    }
  }
}

TEST_CASE("AdaBoost invariants") {
  for (const int classes : {2, 3, 5}) {
    const auto b = blobs(static_cast<std::uint64_t>(classes), 150, 4, classes, 1.2);
    BoostTrace trace;
    const auto state = boost_stumps(b.x, b.y, classes, 100, 1.0, &trace);
    CHECK_FALSE(state.stumps.empty());
    const double limit = 1.0 - 1.0 / classes;
    for (const double e : trace.errors) {
      CHECK(e < limit);
      if (classes == 2) CHECK(e <= 0.5);
    }
    for (const double s : trace.weight_sums) CHECK(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("stump on a perfect split stops boosting") {
  Matrix x(4, 1);
  x << 0, 1, 5, 6;
  const Labels y{0, 0, 1, 1};
  BoostTrace trace;
  const auto state = boost_stumps(x, y, 2, 100, 1.0, &trace);
  CHECK(state.stumps.size() == 1);
  CHECK(state.stumps[0].threshold == 3.0);
}

TEST_CASE("hyperparameter validation") {
  CHECK_THROWS_AS(make_spec(ClassifierKind::KNN, {{"neighbours", 3}}), ConfigError);
  CHECK_THROWS_AS(make_spec(ClassifierKind::KNN, {{"k", 0}}), ConfigError);
  CHECK(make_spec(ClassifierKind::RF).param("n_trees") == 100);
  CHECK(make_spec(ClassifierKind::LR).param("l2") == 1e-4);
}

TEST_CASE("model round trip preserves predictions for every kind") {
  const auto b = blobs(6, 60, 4, 3, 1.0);
  const Matrix q = Matrix::Random(200, 4) * 2.0;
  for (const auto kind : kAllKinds) {
    CAPTURE(to_string(kind));
    const auto model = fit(make_spec(kind, {}, 3), b.x, b.y, "abc");
    const auto loaded = model_from_json(model_to_json(model));
    CHECK(predict_batch(loaded, q, "abc") == predict_batch(model, q, "abc"));
    CHECK(model_to_json(loaded) == model_to_json(model));
  }
}

TEST_CASE("model files") {
  const auto b = blobs(7, 30, 2, 2);
  const auto model = fit(make_spec(ClassifierKind::J48), b.x, b.y, "fp");
  const auto path = std::filesystem::temp_directory_path() / "malfam_model_test.json";
  save_model(model, path);
  CHECK(predict_batch(load_model(path), b.x, "fp") == predict_batch(model, b.x, "fp"));
  std::filesystem::remove(path);

  auto text = model_to_json(model);
  const auto pos = text.find("\"format_version\":1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 18, "\"format_version\":2");
  CHECK_THROWS_AS(model_from_json(text), DataError);
  CHECK_THROWS_AS(model_from_json("{not json"), DataError);
  CHECK_THROWS_AS(predict_batch(model, b.x, "other"), DataError);
}

TEST_CASE("pipeline model scores raw rows") {
  const auto schema = canonical_schema();
  auto spec = default_synthetic_spec(*schema);
  spec.class_count = 3;
  spec.samples_per_class = 20;
  const auto ds = generate_synthetic(spec, schema, canonical_taxonomy());
  const auto params = fit_minmax(ds);
  const auto scaled = apply_minmax(ds, params).data;
  const auto mask = select_threshold(score_chi2(scaled, Task::category), 20);
  const auto projected = apply_mask(scaled, mask);
  auto model = fit(make_spec(ClassifierKind::KNN), projected, Task::category);
  model.scaling = params;
  model.mask = mask;
  CHECK(predict_batch(model, ds) == predict_matrix(model, projected.values()));
  const auto loaded = model_from_json(model_to_json(model));
  CHECK(predict_batch(loaded, ds) == predict_batch(model, ds));
}

}

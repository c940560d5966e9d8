#include "malfam/evaluation.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>

namespace malfam {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fixed(double value, int digits) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", digits, value);
  return buffer;
}

Matrix gather_rows(const Eigen::Ref<const Matrix>& x, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

std::size_t distinct_count(std::span<const int> labels) {
  std::vector<int> v(labels.begin(), labels.end());
  std::sort(v.begin(), v.end());
  return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

}  // namespace

std::string_view to_string(ScalingPolicy policy) {
  return policy == ScalingPolicy::fit_on_train_fold ? "fit_on_train_fold" : "fit_on_full_data";
}

std::string_view to_string(SelectionPolicy policy) {
  return policy == SelectionPolicy::score_on_train_fold ? "score_on_train_fold" : "score_on_full_data";
}

ScalingPolicy parse_scaling_policy(std::string_view text) {
  const auto key = to_lower_trimmed(text);
  if (key == "fit_on_train_fold") return ScalingPolicy::fit_on_train_fold;
  if (key == "fit_on_full_data") return ScalingPolicy::fit_on_full_data;
  throw ConfigError("unknown scaling policy '" + std::string(text) + "'");
}

SelectionPolicy parse_selection_policy(std::string_view text) {
  const auto key = to_lower_trimmed(text);
  if (key == "score_on_train_fold") return SelectionPolicy::score_on_train_fold;
  if (key == "score_on_full_data") return SelectionPolicy::score_on_full_data;
  throw ConfigError("unknown selection policy '" + std::string(text) + "'");
}

std::vector<int> stratified_folds(std::span<const int> labels, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("fold count must be >= 2");
  if (labels.empty()) throw DataError("cannot build folds for an empty dataset");
  if (static_cast<std::size_t>(k) > labels.size()) {
    throw DataError("fold count " + std::to_string(k) + " exceeds sample count " + std::to_string(labels.size()));
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  Rng rng(seed);
  std::vector<int> folds(labels.size(), 0);
  int cursor = 0;
  for (auto& [label, members] : by_class) {
    rng.shuffle(std::span<std::size_t>(members));
    for (const auto i : members) {
      folds[i] = cursor;
      cursor = (cursor + 1) % k;
    }
  }
  return folds;
}

// ------------------------------------------------------------- confusion

ConfusionMatrix::ConfusionMatrix(std::vector<int> classes) : classes_(std::move(classes)) {
  if (classes_.empty()) throw DataError("confusion matrix needs at least one class");
  if (!std::is_sorted(classes_.begin(), classes_.end()) ||
      std::adjacent_find(classes_.begin(), classes_.end()) != classes_.end()) {
    throw DataError("confusion matrix classes must be ascending and distinct");
  }
  const auto c = static_cast<Eigen::Index>(classes_.size());
  counts_ = MatrixX<long long>::Zero(c, c);
}

std::size_t ConfusionMatrix::index_of(int label) const {
  const auto it = std::lower_bound(classes_.begin(), classes_.end(), label);
  if (it == classes_.end() || *it != label) throw DataError("label " + std::to_string(label) + " is not in the class list");
  return static_cast<std::size_t>(it - classes_.begin());
}

void ConfusionMatrix::add(int truth, int prediction, long long count) {
  counts_(static_cast<Eigen::Index>(index_of(truth)), static_cast<Eigen::Index>(index_of(prediction))) += count;
}

ConfusionMatrix confusion(std::span<const int> truths, std::span<const int> predictions, std::vector<int> classes) {
  if (truths.size() != predictions.size()) throw DataError("truths and predictions differ in length");
  if (truths.empty()) throw DataError("confusion matrix of an empty evaluation");
  ConfusionMatrix cm(std::move(classes));
  for (std::size_t i = 0; i < truths.size(); ++i) cm.add(truths[i], predictions[i]);
  return cm;
}

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
  const auto& counts = cm.counts();
  const long long total = counts.sum();
  if (total <= 0) throw DataError("cannot compute metrics of an empty confusion matrix");

  MetricsReport report;
  report.accuracy = static_cast<double>(counts.trace()) / static_cast<double>(total);
  double recall_sum = 0.0, fpr_sum = 0.0, fnr_sum = 0.0;
  for (Eigen::Index c = 0; c < counts.rows(); ++c) {
    const long long tp = counts(c, c);
    const long long positives = counts.row(c).sum();
    if (positives == 0) continue;
    const long long fn = positives - tp;
    const long long fp = counts.col(c).sum() - tp;
    const long long tn = total - tp - fn - fp;
    ClassMetrics m;
    m.label = cm.classes()[static_cast<std::size_t>(c)];
    m.support = positives;
    m.recall = static_cast<double>(tp) / static_cast<double>(positives);
    // FN / (TP + FN) with FN = positives - TP.
    m.fnr = 1.0 - m.recall;
    m.fpr = (fp + tn) > 0 ? static_cast<double>(fp) / static_cast<double>(fp + tn) : 0.0;
    recall_sum += m.recall;
    fpr_sum += m.fpr;
    fnr_sum += m.fnr;
    report.per_class.push_back(m);
  }
  const auto included = static_cast<double>(report.per_class.size());
  report.macro_recall = recall_sum / included;
  report.macro_fpr = fpr_sum / included;
  report.macro_fnr = fnr_sum / included;
  return report;
}

MetricsReport average_reports(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw DataError("no reports to average");
  MetricsReport out;
  const auto count = static_cast<double>(reports.size());
  std::map<int, std::pair<ClassMetrics, int>> per_class;
  for (const auto& r : reports) {
    out.accuracy += r.accuracy;
    out.macro_recall += r.macro_recall;
    out.macro_fpr += r.macro_fpr;
    out.macro_fnr += r.macro_fnr;
    out.wall_seconds += r.wall_seconds;
    out.selection_seconds += r.selection_seconds;
    for (const auto& m : r.per_class) {
      auto& [acc, seen] = per_class[m.label];
      acc.label = m.label;
      acc.support += m.support;
      acc.recall += m.recall;
      acc.fpr += m.fpr;
      acc.fnr += m.fnr;
      ++seen;
    }
  }
  out.accuracy /= count;
  out.macro_recall /= count;
  out.macro_fpr /= count;
  out.macro_fnr /= count;
  for (auto& [label, entry] : per_class) {
    auto& [m, seen] = entry;
    m.recall /= seen;
    m.fpr /= seen;
    m.fnr /= seen;
    m.support /= seen;
    out.per_class.push_back(m);
  }
  out.repeats = static_cast<int>(reports.size());
  out.config_json = reports.front().config_json;
  return out;
}

// ------------------------------------------------------- cross-validation

std::string cv_config_json(const CVConfig& cv) {
  return json{{"k", cv.k},
              {"repeats", cv.repeats},
              {"base_seed", cv.base_seed},
              {"scaling", std::string(to_string(cv.scaling))},
              {"selection_policy", std::string(to_string(cv.selection))},
              {"vary_seed_per_repeat", cv.vary_seed_per_repeat}}
      .dump();
}

namespace {

struct PreparedFold {
  Matrix train;
  Matrix test;
  Labels train_labels;
  std::vector<Eigen::Index> test_rows;
  std::optional<FeatureRanking> ranking;  // nullopt: fewer than two classes
};

/// Scaled fold matrices and feature rankings of one repeat, shared by every
/// classifier and threshold evaluated on it.
struct PreparedRepeat {
  std::uint64_t seed = 0;
  std::vector<PreparedFold> folds;
  double prep_seconds = 0.0;
};

std::optional<FeatureRanking> rank_if_defined(const Matrix& x, std::span<const int> labels, SelectionMethod method,
                                              int bins) {
  if (distinct_count(labels) < 2) return std::nullopt;
  return score_features(x, labels, method, bins);
}

FeatureMask mask_for(const std::optional<FeatureRanking>& ranking, int threshold, Eigen::Index columns) {
  if (ranking) return select_threshold(*ranking, threshold);
  FeatureMask all;
  for (Eigen::Index c = 0; c < columns; ++c) all.selected.push_back(static_cast<std::size_t>(c));
  return all;
}

void check_inputs(const Eigen::Ref<const Matrix>& x, std::span<const int> labels, const CVConfig& cv) {
  if (cv.repeats < 1) throw ConfigError("repeat count must be >= 1");
  if (x.rows() == 0) throw DataError("cannot cross-validate an empty dataset");
  if (static_cast<std::size_t>(x.rows()) != labels.size()) throw DataError("label count differs from row count");
  if (!x.allFinite()) throw DataError("cross-validation input contains non-finite values");
}

PreparedRepeat prepare_folds(const Eigen::Ref<const Matrix>& x, std::span<const int> labels,
                             std::span<const int> folds, const CVConfig& cv,
                             std::optional<std::pair<SelectionMethod, int>> scoring) {
  PreparedRepeat prepared;
  const auto start = Clock::now();

  Matrix full_scaled;
  const bool full_scaling = cv.scaling == ScalingPolicy::fit_on_full_data;
  const bool full_scoring = scoring && cv.selection == SelectionPolicy::score_on_full_data;
  if (full_scaling || full_scoring) {
    full_scaled = x;
    const auto [lo, hi] = column_bounds(full_scaled);
    minmax_scale_inplace(full_scaled, lo, hi);
  }
  std::optional<FeatureRanking> full_ranking;
  if (full_scoring) full_ranking = rank_if_defined(full_scaled, labels, scoring->first, scoring->second);

  prepared.folds.resize(static_cast<std::size_t>(cv.k));
  for (int fold = 0; fold < cv.k; ++fold) {
    auto& pf = prepared.folds[static_cast<std::size_t>(fold)];
    std::vector<Eigen::Index> train_rows;
    for (std::size_t i = 0; i < folds.size(); ++i) {
      if (folds[i] == fold) {
        pf.test_rows.push_back(static_cast<Eigen::Index>(i));
      } else {
        train_rows.push_back(static_cast<Eigen::Index>(i));
        pf.train_labels.push_back(labels[i]);
      }
    }
    if (full_scaling) {
      pf.train = gather_rows(full_scaled, train_rows);
      pf.test = gather_rows(full_scaled, pf.test_rows);
    } else {
      pf.train = gather_rows(x, train_rows);
      pf.test = gather_rows(x, pf.test_rows);
      const auto [lo, hi] = column_bounds(pf.train);
      minmax_scale_inplace(pf.train, lo, hi);
      minmax_scale_inplace(pf.test, lo, hi);
    }
    if (full_scoring) {
      pf.ranking = full_ranking;
    } else if (scoring) {
      pf.ranking = rank_if_defined(pf.train, pf.train_labels, scoring->first, scoring->second);
    }
  }
  prepared.prep_seconds = seconds_since(start);
  return prepared;
}

PreparedRepeat prepare_repeat(const Eigen::Ref<const Matrix>& x, std::span<const int> labels, const CVConfig& cv,
                              int repeat, std::optional<std::pair<SelectionMethod, int>> scoring) {
  const std::uint64_t seed = cv.base_seed + (cv.vary_seed_per_repeat ? static_cast<std::uint64_t>(repeat) : 0);
  auto prepared = prepare_folds(x, labels, stratified_folds(labels, cv.k, seed), cv, scoring);
  prepared.seed = seed;
  return prepared;
}

/// Pooled out-of-fold predictions of one repeat.
MetricsReport evaluate_repeat(const PreparedRepeat& prepared, std::span<const int> labels,
                              const std::vector<int>& classes, const ClassifierSpec& spec,
                              std::optional<int> threshold) {
  std::vector<int> predictions(labels.size(), 0);
  double wall = 0.0;
  double prep = prepared.prep_seconds;
  for (std::size_t fold = 0; fold < prepared.folds.size(); ++fold) {
    const auto& pf = prepared.folds[fold];
    auto start = Clock::now();
    Matrix projected_train, projected_test;
    if (threshold) {
      const auto mask = mask_for(pf.ranking, *threshold, pf.train.cols());
      projected_train = project_columns(pf.train, mask);
      projected_test = project_columns(pf.test, mask);
    }
    const Matrix& train = threshold ? projected_train : pf.train;
    const Matrix& test = threshold ? projected_test : pf.test;
    prep += seconds_since(start);

    start = Clock::now();
    auto fold_spec = spec;
    fold_spec.seed = spec.seed + splitmix64(prepared.seed) + static_cast<std::uint64_t>(fold);
    const auto model = fit(fold_spec, train, pf.train_labels);
    const auto predicted = predict_matrix(model, test);
    wall += seconds_since(start);
    for (std::size_t j = 0; j < pf.test_rows.size(); ++j) {
      predictions[static_cast<std::size_t>(pf.test_rows[j])] = predicted[j];
    }
  }
  auto report = compute_metrics(confusion(labels, predictions, classes));
  report.wall_seconds = wall;
  report.selection_seconds = prep;
  return report;
}

std::vector<int> class_list(std::span<const int> labels) {
  std::vector<int> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  return classes;
}

std::string config_echo(const CVConfig& cv, const ClassifierSpec& spec, const std::optional<SelectionConfig>& selection) {
  json echo{{"cv", json::parse(cv_config_json(cv))},
            {"classifier", {{"kind", std::string(to_string(spec.kind))}, {"hyperparameters", spec.hyperparameters},
                            {"seed", spec.seed}}}};
  if (selection) {
    echo["selection"] = {{"method", std::string(to_string(selection->method))},
                         {"threshold_percent", selection->threshold_percent},
                         {"bins", selection->bins}};
  } else {
    echo["selection"] = nullptr;
  }
  return echo.dump();
}

}  // namespace

MetricsReport cross_validate(const Eigen::Ref<const Matrix>& x, std::span<const int> labels,
                             const ClassifierSpec& raw_spec, const std::optional<SelectionConfig>& selection,
                             const CVConfig& cv) {
  check_inputs(x, labels, cv);
  if (selection) threshold_count(selection->threshold_percent, static_cast<std::size_t>(x.cols()));
  const auto spec = make_spec(raw_spec.kind, raw_spec.hyperparameters, raw_spec.seed);
  const auto classes = class_list(labels);
  std::optional<std::pair<SelectionMethod, int>> scoring;
  if (selection) scoring.emplace(selection->method, selection->bins);
  std::optional<int> threshold;
  if (selection) threshold = selection->threshold_percent;

  std::vector<MetricsReport> reports;
  for (int repeat = 0; repeat < cv.repeats; ++repeat) {
    const auto prepared = prepare_repeat(x, labels, cv, repeat, scoring);
    reports.push_back(evaluate_repeat(prepared, labels, classes, spec, threshold));
  }
  auto report = average_reports(reports);
  report.config_json = config_echo(cv, spec, selection);
  return report;
}

MetricsReport cross_validate(const Dataset& dataset, Task task, const ClassifierSpec& spec,
                             const std::optional<SelectionConfig>& selection, const CVConfig& cv) {
  return cross_validate(dataset.values(), dataset.labels(task), spec, selection, cv);
}

std::vector<FeatureMask> fold_masks(const Eigen::Ref<const Matrix>& x, std::span<const int> labels,
                                    std::span<const int> folds, const SelectionConfig& selection,
                                    const CVConfig& cv) {
  check_inputs(x, labels, cv);
  if (folds.size() != labels.size()) throw DataError("fold count differs from label count");
  if (std::any_of(folds.begin(), folds.end(), [&](int f) { return f < 0 || f >= cv.k; })) {
    throw DataError("fold index out of range");
  }
  const auto prepared = prepare_folds(x, labels, folds, cv, std::pair{selection.method, selection.bins});
  std::vector<FeatureMask> masks;
  for (const auto& pf : prepared.folds) masks.push_back(mask_for(pf.ranking, selection.threshold_percent, x.cols()));
  return masks;
}

// ----------------------------------------------------------------- sweep

const SweepCell* SweepReport::cell(int threshold, ClassifierKind classifier) const {
  for (const auto& c : cells) {
    if (c.threshold == threshold && c.classifier == classifier) return &c;
  }
  return nullptr;
}

SweepReport sweep(const Dataset& dataset, Task task, SelectionMethod method, const CVConfig& cv, std::uint64_t seed,
                  int bins) {
  SweepReport report;
  report.method = method;
  report.task = task;
  report.bins = bins;
  for (const int threshold : kSweepThresholds) {
    for (const auto kind : kSweepClassifiers) {
      SweepCell cell;
      cell.threshold = threshold;
      cell.classifier = kind;
      report.cells.push_back(std::move(cell));
    }
  }

  const auto& x = dataset.values();
  const auto& labels = dataset.labels(task);
  std::vector<std::vector<MetricsReport>> runs(report.cells.size());
  try {
    check_inputs(x, labels, cv);
    const auto classes = class_list(labels);
    for (int repeat = 0; repeat < cv.repeats; ++repeat) {
      const auto prepared = prepare_repeat(x, labels, cv, repeat, std::pair{method, bins});
      for (std::size_t i = 0; i < report.cells.size(); ++i) {
        auto& cell = report.cells[i];
        if (!cell.error.empty()) continue;
        try {
          runs[i].push_back(
              evaluate_repeat(prepared, labels, classes, make_spec(cell.classifier, {}, seed), cell.threshold));
        } catch (const Error& e) {
          cell.error = e.what();
        }
      }
    }
  } catch (const Error& e) {
    for (auto& cell : report.cells) cell.error = e.what();
  }

  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    auto& cell = report.cells[i];
    if (!cell.error.empty()) continue;
    const auto metrics = average_reports(runs[i]);
    cell.accuracy = metrics.accuracy;
    cell.wall_seconds = metrics.wall_seconds + metrics.selection_seconds;
    if (!report.best || *cell.accuracy > *report.cells[*report.best].accuracy) report.best = i;
  }
  return report;
}

// --------------------------------------------------------- serialization

std::string metrics_to_json(const MetricsReport& report, bool include_timing) {
  json per_class = json::array();
  for (const auto& m : report.per_class) {
    per_class.push_back(
        {{"label", m.label}, {"support", m.support}, {"recall", m.recall}, {"fpr", m.fpr}, {"fnr", m.fnr}});
  }
  json doc{{"accuracy", report.accuracy},
           {"macro_recall", report.macro_recall},
           {"macro_fpr", report.macro_fpr},
           {"macro_fnr", report.macro_fnr},
           {"repeats", report.repeats},
           {"per_class", per_class},
           {"config", report.config_json.empty() ? json(nullptr) : json::parse(report.config_json)}};
  if (include_timing) {
    doc["wall_seconds"] = report.wall_seconds;
    doc["selection_seconds"] = report.selection_seconds;
  }
  return doc.dump(2);
}

std::string sweep_to_json(const SweepReport& report, bool include_timing) {
  json cells = json::array();
  for (const auto& c : report.cells) {
    json cell{{"threshold", c.threshold}, {"classifier", std::string(to_string(c.classifier))}};
    cell["accuracy"] = c.accuracy ? json(*c.accuracy) : json(nullptr);
    if (!c.error.empty()) cell["error"] = c.error;
    if (include_timing) cell["wall_seconds"] = c.wall_seconds;
    cells.push_back(std::move(cell));
  }
  json best = nullptr;
  if (report.best) {
    const auto& b = report.cells[*report.best];
    best = {{"threshold", b.threshold}, {"classifier", std::string(to_string(b.classifier))}, {"accuracy", *b.accuracy}};
  }
  return json{{"method", std::string(to_string(report.method))},
              {"task", std::string(to_string(report.task))},
              {"bins", report.bins},
              {"grid", cells},
              {"best", best}}
      .dump(2);
}

void write_metrics_csv(std::ostream& out, std::string_view classifier, const MetricsReport& report) {
  out << "Classifier,Accuracy,Recall,FPR,FNR,Time (seconds)\n"
      << classifier << ',' << fixed(report.accuracy, 4) << ',' << fixed(report.macro_recall, 4) << ','
      << fixed(report.macro_fpr, 4) << ',' << fixed(report.macro_fnr, 4) << ',' << fixed(report.wall_seconds, 2)
      << '\n';
}

void write_sweep_csv(std::ostream& out, const SweepReport& report) {
  out << "Threshold";
  for (const auto kind : kSweepClassifiers) out << ',' << to_string(kind);
  out << '\n';
  for (const int threshold : kSweepThresholds) {
    out << threshold << '%';
    for (const auto kind : kSweepClassifiers) {
      const auto* c = report.cell(threshold, kind);
      out << ',' << (c && c->accuracy ? fixed(*c->accuracy, 4) : std::string("ERROR"));
    }
    out << '\n';
  }
}

}  // namespace malfam

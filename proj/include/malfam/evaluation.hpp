#pragma once

#include "malfam/classifiers.hpp"

#include <iosfwd>

namespace malfam {

enum class ScalingPolicy { fit_on_train_fold, fit_on_full_data };
enum class SelectionPolicy { score_on_train_fold, score_on_full_data };

std::string_view to_string(ScalingPolicy policy);
std::string_view to_string(SelectionPolicy policy);
ScalingPolicy parse_scaling_policy(std::string_view text);
SelectionPolicy parse_selection_policy(std::string_view text);

struct CVConfig {
  int k = 10;
  int repeats = 10;
  std::uint64_t base_seed = 0;
  ScalingPolicy scaling = ScalingPolicy::fit_on_train_fold;
  SelectionPolicy selection = SelectionPolicy::score_on_train_fold;
  /// Repeat r uses base_seed + r; when false every repeat reuses base_seed.
  bool vary_seed_per_repeat = true;
};

/// Fold index per sample. Within each class (ascending label) samples are
/// shuffled and dealt round-robin, continuing from the fold where the
/// previous class stopped.
std::vector<int> stratified_folds(std::span<const int> labels, int k, std::uint64_t seed);

/// Counts indexed [truth][prediction] over `classes` (ascending label ids).
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::vector<int> classes);

  const std::vector<int>& classes() const { return classes_; }
  const MatrixX<long long>& counts() const { return counts_; }
  long long total() const { return counts_.sum(); }
  std::size_t index_of(int label) const;
  void add(int truth, int prediction, long long count = 1);

 private:
  std::vector<int> classes_;
  MatrixX<long long> counts_;
};

ConfusionMatrix confusion(std::span<const int> truths, std::span<const int> predictions, std::vector<int> classes);

struct ClassMetrics {
  int label = 0;
  long long support = 0;
  double recall = 0.0;
  double fpr = 0.0;
  double fnr = 0.0;
};

struct MetricsReport {
  double accuracy = 0.0;  // micro: trace / total
  double macro_recall = 0.0;
  double macro_fpr = 0.0;
  double macro_fnr = 0.0;
  std::vector<ClassMetrics> per_class;  // classes with nonzero support
  double wall_seconds = 0.0;       // training + prediction
  double selection_seconds = 0.0;  // scaling + feature scoring
  int repeats = 1;
  std::string config_json;  // echo of the producing configuration
};

/// One-vs-rest TP/FP/TN/FN per class; classes without truth rows are left
/// out of the macro averages.
MetricsReport compute_metrics(const ConfusionMatrix& cm);

/// Arithmetic mean of the reports' metrics; wall times are summed.
MetricsReport average_reports(const std::vector<MetricsReport>& reports);

MetricsReport cross_validate(const Dataset& dataset, Task task, const ClassifierSpec& spec,
                             const std::optional<SelectionConfig>& selection, const CVConfig& cv);

/// Lower-level form used by cross_validate and the sweep.
MetricsReport cross_validate(const Eigen::Ref<const Matrix>& x, std::span<const int> labels,
                             const ClassifierSpec& spec, const std::optional<SelectionConfig>& selection,
                             const CVConfig& cv);

/// Feature mask each fold's model would be trained on, for explicit fold
/// assignments (values in [0, cv.k)).
std::vector<FeatureMask> fold_masks(const Eigen::Ref<const Matrix>& x, std::span<const int> labels,
                                    std::span<const int> folds, const SelectionConfig& selection,
                                    const CVConfig& cv);

inline constexpr int kSweepThresholds[] = {20, 40, 60, 80, 100};
inline constexpr ClassifierKind kSweepClassifiers[] = {ClassifierKind::RF, ClassifierKind::KNN, ClassifierKind::J48,
                                                       ClassifierKind::NB};

struct SweepCell {
  int threshold = 0;
  ClassifierKind classifier = ClassifierKind::RF;
  std::optional<double> accuracy;
  std::string error;
  double wall_seconds = 0.0;
};

struct SweepReport {
  SelectionMethod method = SelectionMethod::mi;
  Task task = Task::category;
  int bins = kDefaultMiBins;
  std::vector<SweepCell> cells;  // threshold-major, classifiers RF, KNN, J48, NB
  std::optional<std::size_t> best;

  const SweepCell* cell(int threshold, ClassifierKind classifier) const;
};

/// threshold x classifier accuracy grid; a failing cell records its error.
SweepReport sweep(const Dataset& dataset, Task task, SelectionMethod method, const CVConfig& cv,
                  std::uint64_t seed = 0, int bins = kDefaultMiBins);

// ---- serialization ----------------------------------------------------

/// JSON report. Wall times are left out unless `include_timing`, so reports
/// of identical runs are byte-identical.
std::string metrics_to_json(const MetricsReport& report, bool include_timing = false);
std::string sweep_to_json(const SweepReport& report, bool include_timing = false);

/// Classifier,Accuracy,Recall,FPR,FNR,Time
void write_metrics_csv(std::ostream& out, std::string_view classifier, const MetricsReport& report);

/// Threshold,RF,KNN,J48,NB
void write_sweep_csv(std::ostream& out, const SweepReport& report);

std::string cv_config_json(const CVConfig& cv);

}  // namespace malfam

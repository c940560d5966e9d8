#include "support.hpp"

#include "malfam/cli.hpp"
#include "malfam/logistic.hpp"
#include "malfam/model_io.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

using namespace malfam;
using namespace malfam::testing;

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  enum Status { pass, fail, skip } status;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const std::function<Outcome()>& body) {
  const auto start = Clock::now();
  Outcome outcome;
  try {
    outcome = body();
  } catch (const std::exception& e) {
    outcome = {Outcome::fail, std::string("exception: ") + e.what()};
  }
  const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
  const char* tag = outcome.status == Outcome::pass ? "PASS" : outcome.status == Outcome::fail ? "FAIL" : "SKIP";
  if (outcome.status == Outcome::fail) ++failures;
  char timing[32];
  std::snprintf(timing, sizeof(timing), "%.2fs", seconds);
  std::cout << "[" << tag << "] " << id << " " << title << ": " << outcome.detail << " (" << timing << ")"
            << std::endl;
}

Outcome verdict(bool ok, const std::string& detail) { return {ok ? Outcome::pass : Outcome::fail, detail}; }

std::string fmt(double v, int digits = 4) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", digits, v);
  return buffer;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  return run(args, out, err);
}

// ---- criteria ---------------------------------------------------------

Outcome threshold_rule() {
  const auto c60 = threshold_count(60, 141);
  const auto c80 = threshold_count(80, 141);
  return verdict(c60 == 85 && c80 == 113,
                 "threshold_count(60,141)=" + std::to_string(c60) + ", threshold_count(80,141)=" + std::to_string(c80));
}

Outcome metric_identity() {
  Rng rng(2024);
  double worst = 0.0;
  bool exact = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const int classes = 2 + static_cast<int>(rng.below(13));
    const auto m = compute_metrics(random_confusion(rng, classes));
    worst = std::max(worst, std::abs(m.macro_recall + m.macro_fnr - 1.0));
    for (const auto& c : m.per_class) exact = exact && c.fnr == 1.0 - c.recall;
  }
  const double table9 = std::abs(0.6646 + 0.3354 - 1.0);
  const double table13 = std::abs(0.3627 + 0.6373 - 1.0);
  return verdict(worst <= 1e-12 && exact && table9 <= 1e-12 && table13 <= 1e-12,
                 "1000 matrices, max |recall+FNR-1| = " + fmt(worst, 17) + ", per-class exact = " +
                     (exact ? "yes" : "no") + ", RF rows 0.6646+0.3354 and 0.3627+0.6373 sum to 1");
}

Outcome oracle_equivalence() {
  std::size_t datasets = 0;
  double worst_chi2 = 0.0, worst_mi = 0.0;
  for (std::size_t n = 1; n <= 6; ++n) {
    std::size_t value_codes = 1, label_codes = std::size_t{1} << n;
    for (std::size_t i = 0; i < n; ++i) value_codes *= 3;
    for (std::size_t lc = 0; lc < label_codes; ++lc) {
      Labels y(n);
      for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>((lc >> i) & 1U);
      if (std::set<int>(y.begin(), y.end()).size() < 2) continue;
      for (std::size_t vc = 0; vc < value_codes; ++vc) {
        std::vector<double> values(n);
        auto code = vc;
        for (std::size_t i = 0; i < n; ++i) {
          values[i] = static_cast<double>(code % 3);
          code /= 3;
        }
        const Matrix x = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(n));
        worst_chi2 = std::max(worst_chi2, std::abs(chi2_scores(x, y)[0] - chi2_oracle(values, y)));
        worst_mi = std::max(worst_mi, std::abs(mi_scores(x, y, kDefaultMiBins)[0] - mi_oracle(values, y)));
        ++datasets;
      }
    }
  }
  return verdict(worst_chi2 <= 1e-9 && worst_mi <= 1e-9,
                 std::to_string(datasets) + " two-class datasets (n<=6, values {0,1,2}); max chi2 diff " +
                     fmt(worst_chi2, 12) + ", max MI diff " + fmt(worst_mi, 12));
}

Outcome synthetic_benchmark() {
  const auto start = Clock::now();
  const auto schema = canonical_schema();
  const auto spec = default_synthetic_spec(*schema);
  const auto ds = generate_synthetic(spec, schema, canonical_taxonomy());

  CVConfig rf_cv;
  rf_cv.k = 10;
  rf_cv.repeats = 3;
  const auto rf = cross_validate(ds, Task::category, make_spec(ClassifierKind::RF), std::nullopt, rf_cv);

  const auto scaled = apply_minmax(ds, fit_minmax(ds)).data;
  const auto mask = select_threshold(score_mi(scaled, Task::category), 60);
  std::size_t kept = 0;
  for (const auto ordinal : mask.selected) {
    const auto& id = (*schema)[ordinal].id;
    kept += std::count(spec.informative_feature_ids.begin(), spec.informative_feature_ids.end(), id) > 0 ? 1 : 0;
  }

  CVConfig sweep_cv;
  sweep_cv.k = 10;
  sweep_cv.repeats = 1;
  const auto grid = sweep(ds, Task::category, SelectionMethod::mi, sweep_cv);
  std::size_t complete = 0;
  for (const auto& c : grid.cells) complete += c.accuracy ? 1 : 0;

  const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
  const bool ok = rf.accuracy >= 0.95 && kept >= 36 && grid.cells.size() == 20 && complete == 20 && seconds < 120.0;
  std::string best = "none";
  if (grid.best) {
    const auto& b = grid.cells[*grid.best];
    best = std::to_string(b.threshold) + "% " + std::string(to_string(b.classifier)) + " " + fmt(*b.accuracy);
  }
  return verdict(ok, "RF 10-fold x3 accuracy " + fmt(rf.accuracy) + " (floor 0.95); MI 60% keeps " +
                         std::to_string(kept) + "/40 informative (floor 36); sweep " + std::to_string(complete) +
                         "/20 cells, best " + best + "; " + fmt(seconds, 1) + "s of 120s budget");
}

Outcome gradient_check() {
  Rng rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<Eigen::Index>(1 + rng.below(30));
    const auto d = static_cast<Eigen::Index>(1 + rng.below(5));
    const auto c = static_cast<Eigen::Index>(2 + rng.below(2));
    Matrix x(n, d), w(d, c);
    Vector b(c);
    Labels y(static_cast<std::size_t>(n));
    for (auto& v : x.reshaped()) v = rng.normal();
    for (auto& v : w.reshaped()) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    for (auto& v : y) v = static_cast<int>(rng.below(static_cast<std::uint64_t>(c)));
    const double l2 = rng.uniform();

    Matrix gw;
    Vector gb;
    logistic_gradient<double>(x, y, w, b, l2, gw, gb);
    const double h = 1e-5;
    Matrix nw(d, c);
    Vector nb(c);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      Matrix up = w, down = w;
      up.reshaped()(i) += h;
      down.reshaped()(i) -= h;
      nw.reshaped()(i) =
          (logistic_objective<double>(x, y, up, b, l2) - logistic_objective<double>(x, y, down, b, l2)) / (2 * h);
    }
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      Vector up = b, down = b;
      up(i) += h;
      down(i) -= h;
      nb(i) = (logistic_objective<double>(x, y, w, up, l2) - logistic_objective<double>(x, y, w, down, l2)) / (2 * h);
    }
    const double diff = std::sqrt((gw - nw).squaredNorm() + (gb - nb).squaredNorm());
    const double scale = std::max({std::sqrt(gw.squaredNorm() + gb.squaredNorm()),
                                   std::sqrt(nw.squaredNorm() + nb.squaredNorm()), 1e-8});
    worst = std::max(worst, diff / scale);
  }
  char text[96];
  std::snprintf(text, sizeof(text), "100 instances, max relative error %.3e (limit 1e-4)", worst);
  return verdict(worst <= 1e-4, text);
}

Outcome determinism() {
  const auto dir = fs::temp_directory_path() / "malfam_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto data = (dir / "synthetic.csv").string();
  if (cli({"synth", "--seed", "7", "--classes", "14", "--per-class", "30", "--out", data}) != 0) {
    return {Outcome::fail, "synth failed"};
  }
  const std::vector<std::string> cv{"cv", "--data", data, "--classifier", "RF", "--threshold", "60", "--method",
                                    "mi", "--repeats", "2", "--seed", "11", "--out-dir", dir.string()};
  const std::vector<std::string> sw{"sweep", "--data", data, "--method", "chi2", "--k", "5", "--repeats", "1",
                                    "--seed", "11", "--out-dir", dir.string()};
  std::string cv_runs[2], sweep_runs[2];
  for (int i = 0; i < 2; ++i) {
    if (cli(cv) != 0 || cli(sw) != 0) return {Outcome::fail, "cli run failed"};
    cv_runs[i] = slurp(dir / "cv_RF_category.json");
    sweep_runs[i] = slurp(dir / "sweep_chi2_category.json");
  }
  fs::remove_all(dir);
  const bool ok = !cv_runs[0].empty() && cv_runs[0] == cv_runs[1] && !sweep_runs[0].empty() &&
                  sweep_runs[0] == sweep_runs[1];
  return verdict(ok, "cv JSON " + std::string(cv_runs[0] == cv_runs[1] ? "identical" : "differs") + ", sweep JSON " +
                         (sweep_runs[0] == sweep_runs[1] ? "identical" : "differs") + " across two runs");
}

Outcome model_round_trip() {
  Rng rng(5);
  const Eigen::Index n = 90, d = 6;
  Matrix x(n, d);
  Labels y(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(i)] = static_cast<int>(i % 3) * 2 + 1;
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = (j % 3 == i % 3 ? 1.0 : 0.0) + 0.7 * rng.normal();
  }
  Matrix queries(1000, d);
  for (auto& v : queries.reshaped()) v = 3.0 * rng.normal();

  const auto path = fs::temp_directory_path() / "malfam_acceptance_model.json";
  std::string detail;
  bool ok = true;
  for (const auto kind : {ClassifierKind::J48, ClassifierKind::RF, ClassifierKind::KNN, ClassifierKind::NB,
                          ClassifierKind::LR, ClassifierKind::AB}) {
    const auto model = fit(make_spec(kind, {}, 13), x, y, "roundtrip");
    save_model(model, path);
    const auto loaded = load_model(path);
    const bool same = predict_batch(loaded, queries, "roundtrip") == predict_batch(model, queries, "roundtrip");
    ok = ok && same;
    detail += std::string(detail.empty() ? "" : ", ") + std::string(to_string(kind)) + (same ? " ok" : " MISMATCH");
  }
  fs::remove(path);
  return verdict(ok, "1000 inputs each: " + detail);
}

Outcome real_data_track() {
  const char* path = std::getenv("MALFAM_REAL_DATA");
  if (path == nullptr || *path == '\0') return {Outcome::skip, "set MALFAM_REAL_DATA to a dataset CSV to run"};
  const auto raw = ingest_csv_file(path, canonical_schema(), canonical_taxonomy());
  const auto summary = validate_dataset(raw);
  std::string detail = std::to_string(summary.samples) + " samples, " + std::to_string(summary.categories_present) +
                       " categories, " + std::to_string(summary.families_present) + " families";
  const bool counts = summary.samples == 28380 && summary.categories_present == 14 && summary.families_present == 180;
  const auto clean = dedupe(drop_incomplete(raw));
  CVConfig cv;
  cv.repeats = 1;
  const auto grid = sweep(clean, Task::category, SelectionMethod::mi, cv);
  if (grid.best) {
    const auto& b = grid.cells[*grid.best];
    detail += "; best " + std::to_string(b.threshold) + "% " + std::string(to_string(b.classifier)) + " " +
              fmt(*b.accuracy) + " (reference 0.9689, difference " + fmt(*b.accuracy - 0.9689) + ", reported only)";
  }
  return verdict(counts, detail);
}

}  // namespace

int main() {
  report(1, "threshold rule", threshold_rule);
  report(2, "metric identity", metric_identity);
  report(3, "oracle equivalence", oracle_equivalence);
  report(4, "synthetic benchmark", synthetic_benchmark);
  report(5, "logistic gradient check", gradient_check);
  report(6, "determinism", determinism);
  report(7, "model round trip", model_round_trip);
  report(8, "real-data track", real_data_track);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}

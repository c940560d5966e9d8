#include "malfam/cli.hpp"

#include "malfam/evaluation.hpp"
#include "malfam/model_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#ifndef MALFAM_DATA_DIR
#define MALFAM_DATA_DIR "data"
#endif

namespace malfam {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string config;
  std::string schema = std::string(MALFAM_DATA_DIR) + "/schema_141.json";
  std::string taxonomy = std::string(MALFAM_DATA_DIR) + "/taxonomy_andmal2020.json";
  std::string column_map;
  std::string data;
  std::string out_dir = ".";
  std::string out;
  std::string model;
  std::string task = "category";
  std::string classifier = "RF";
  std::string method = "mi";
  std::optional<int> threshold;
  int bins = kDefaultMiBins;
  int k = 10;
  int repeats = 10;
  std::optional<std::uint64_t> seed;
  std::string scaling = "fit_on_train_fold";
  std::string selection_policy = "score_on_train_fold";
  bool same_seed = false;
  std::vector<std::string> params;
  std::size_t classes = 14;
  std::size_t per_class = 300;
  std::size_t informative = 40;
  double separation = 2.0;
  double noise = 1.0;
};

/// Flag tokens from a --config JSON object: {"k": 5, "param": {"n_trees": 10}}
/// becomes --k 5 --param n_trees=10.
std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config file " + path + ": expected a JSON object");

  auto scalar = [&](const std::string& key, const json& v) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return v.dump();
    if (v.is_number()) return format_double(v.get<double>());
    throw ConfigError("config file " + path + ": unsupported value for '" + key + "'");
  };

  std::vector<std::string> tokens;
  for (const auto& [raw_key, value] : doc.items()) {
    std::string key = raw_key;
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "config") throw ConfigError("config file " + path + ": nested config is not allowed");
    const auto flag = "--" + key;
    if (value.is_boolean()) {
      if (value.get<bool>()) tokens.push_back(flag);
    } else if (value.is_object()) {
      for (const auto& [name, v] : value.items()) {
        tokens.push_back(flag);
        tokens.push_back(name + "=" + scalar(key, v));
      }
    } else if (value.is_array()) {
      for (const auto& v : value) {
        tokens.push_back(flag);
        tokens.push_back(scalar(key, v));
      }
    } else if (!value.is_null()) {
      tokens.push_back(flag);
      tokens.push_back(scalar(key, value));
    }
  }
  return tokens;
}

Hyperparameters parse_params(const std::vector<std::string>& items) {
  Hyperparameters out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--param expects name=value, got '" + item + "'");
    const auto text = item.substr(eq + 1);
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      throw ConfigError("--param " + item.substr(0, eq) + ": '" + text + "' is not a number");
    }
    out[item.substr(0, eq)] = value;
  }
  return out;
}

class Context {
 public:
  Context(const Options& opt, std::ostream& out, std::ostream& err) : opt_(opt), out_(out), err_(err) {}

  std::ostream& out() { return out_; }
  std::ostream& log() { return err_; }
  const Options& opt() const { return opt_; }

  SchemaPtr schema() {
    if (!schema_) schema_ = std::make_shared<const FeatureSchema>(load_schema_file(opt_.schema));
    return schema_;
  }

  TaxonomyPtr taxonomy() {
    if (!taxonomy_) taxonomy_ = std::make_shared<const LabelTaxonomy>(load_taxonomy_file(opt_.taxonomy));
    return taxonomy_;
  }

  ColumnMap columns() const {
    if (opt_.column_map.empty()) return {};
    std::ifstream in(opt_.column_map);
    if (!in) throw DataError("cannot open column map " + opt_.column_map);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return load_column_map(buffer.str());
  }

  Dataset load() {
    if (opt_.data.empty()) throw ConfigError("--data is required");
    auto dataset = ingest_csv_file(opt_.data, schema(), taxonomy(), columns());
    log() << "loaded " << dataset.size() << " rows from " << opt_.data << '\n';
    return dataset;
  }

  /// Rows with all values finite, duplicates removed.
  Dataset load_clean() {
    const auto raw = load();
    auto complete = drop_incomplete(raw);
    auto unique = dedupe(complete);
    log() << "dropped " << raw.size() - complete.size() << " incomplete and " << complete.size() - unique.size()
          << " duplicate rows\n";
    return unique;
  }

  Task task() const { return parse_task(opt_.task); }

  CVConfig cv() const {
    CVConfig cv;
    cv.k = opt_.k;
    cv.repeats = opt_.repeats;
    cv.base_seed = opt_.seed.value_or(0);
    cv.scaling = parse_scaling_policy(opt_.scaling);
    cv.selection = parse_selection_policy(opt_.selection_policy);
    cv.vary_seed_per_repeat = !opt_.same_seed;
    return cv;
  }

  fs::path output(const std::string& default_name) const {
    if (!opt_.out.empty()) return opt_.out;
    return fs::path(opt_.out_dir) / default_name;
  }

  fs::path in_out_dir(const std::string& name) const { return fs::path(opt_.out_dir) / name; }

  void write(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot write " + path.string());
    file << content;
    if (!file) throw DataError("failed writing " + path.string());
    log() << "wrote " << path.string() << '\n';
  }

 private:
  const Options& opt_;
  std::ostream& out_;
  std::ostream& err_;
  SchemaPtr schema_;
  TaxonomyPtr taxonomy_;
};

std::string with_label_names(const std::string& report_json, const LabelTaxonomy& taxonomy, Task task) {
  auto doc = json::parse(report_json);
  for (auto& entry : doc["per_class"]) entry["name"] = taxonomy.label_name(task, entry["label"].get<int>());
  doc["task"] = std::string(to_string(task));
  return doc.dump(2) + "\n";
}

std::string timing_json(const json& timing) { return timing.dump(2) + "\n"; }

// ------------------------------------------------------------ subcommands

void cmd_validate(Context& ctx) {
  const auto report = validate_dataset(ctx.load());
  const auto text = report.to_json() + "\n";
  if (ctx.opt().out.empty()) {
    ctx.out() << text;
  } else {
    ctx.write(ctx.opt().out, text);
  }
}

void cmd_preprocess(Context& ctx) {
  const auto clean = ctx.load_clean();
  const auto params = fit_minmax(clean);
  const auto scaled = apply_minmax(clean, params);
  std::ostringstream csv;
  write_csv(csv, scaled.data);
  ctx.write(ctx.output("preprocessed.csv"), csv.str());
  ctx.write(ctx.in_out_dir("scale_params.json"), params.to_json() + "\n");
}

void cmd_rank(Context& ctx) {
  const auto method = parse_selection_method(ctx.opt().method);
  const auto task = ctx.task();
  const auto clean = ctx.load_clean();
  const auto scaled = apply_minmax(clean, fit_minmax(clean)).data;
  const auto ranking = score_features(scaled.values(), scaled.labels(task), method, ctx.opt().bins);
  std::ostringstream csv;
  write_ranking_csv(csv, ranking, clean.schema());
  ctx.write(ctx.output("ranking_" + std::string(to_string(method)) + "_" + std::string(to_string(task)) + ".csv"),
            csv.str());
}

void cmd_cv(Context& ctx) {
  const auto& opt = ctx.opt();
  const auto task = ctx.task();
  const auto kind = parse_classifier_kind(opt.classifier);
  const auto spec = make_spec(kind, parse_params(opt.params), opt.seed.value_or(0));
  std::optional<SelectionConfig> selection;
  if (opt.threshold) selection = SelectionConfig{parse_selection_method(opt.method), *opt.threshold, opt.bins};
  const auto cv = ctx.cv();
  const auto dataset = ctx.load_clean();

  const auto report = cross_validate(dataset, task, spec, selection, cv);
  const auto stem = "cv_" + std::string(to_string(kind)) + "_" + std::string(to_string(task));
  ctx.write(ctx.output(stem + ".json"), with_label_names(metrics_to_json(report), dataset.taxonomy(), task));
  std::ostringstream csv;
  write_metrics_csv(csv, to_string(kind), report);
  ctx.write(ctx.in_out_dir(stem + ".csv"), csv.str());
  ctx.write(ctx.in_out_dir(stem + "_timing.json"),
            timing_json({{"wall_seconds", report.wall_seconds}, {"selection_seconds", report.selection_seconds}}));
  ctx.log() << "accuracy " << format_double(report.accuracy) << '\n';
}

void cmd_sweep(Context& ctx) {
  const auto& opt = ctx.opt();
  const auto task = ctx.task();
  const auto method = parse_selection_method(opt.method);
  const auto cv = ctx.cv();
  const auto dataset = ctx.load_clean();
  const auto report = sweep(dataset, task, method, cv, opt.seed.value_or(0), opt.bins);
  const auto stem = "sweep_" + std::string(to_string(method)) + "_" + std::string(to_string(task));
  ctx.write(ctx.output(stem + ".json"), sweep_to_json(report) + "\n");
  std::ostringstream csv;
  write_sweep_csv(csv, report);
  ctx.write(ctx.in_out_dir(stem + ".csv"), csv.str());
  json timing = json::array();
  for (const auto& c : report.cells) {
    timing.push_back({{"threshold", c.threshold},
                      {"classifier", std::string(to_string(c.classifier))},
                      {"wall_seconds", c.wall_seconds}});
  }
  ctx.write(ctx.in_out_dir(stem + "_timing.json"), timing_json(timing));
  for (const auto& c : report.cells) {
    if (!c.error.empty()) ctx.log() << c.threshold << "% " << to_string(c.classifier) << ": " << c.error << '\n';
  }
}

void cmd_train(Context& ctx) {
  const auto& opt = ctx.opt();
  const auto task = ctx.task();
  const auto spec = make_spec(parse_classifier_kind(opt.classifier), parse_params(opt.params), opt.seed.value_or(0));
  std::optional<SelectionMethod> method;
  if (opt.threshold) method = parse_selection_method(opt.method);
  const auto dataset = ctx.load_clean();

  const auto params = fit_minmax(dataset);
  Matrix x = apply_minmax(dataset, params).data.values();
  const auto& labels = dataset.labels(task);
  std::optional<FeatureMask> mask;
  std::string fingerprint = dataset.schema().fingerprint();
  if (opt.threshold) {
    mask = select_threshold(score_features(x, labels, *method, opt.bins), *opt.threshold);
    x = project_columns(x, *mask);
    fingerprint = mask_fingerprint(fingerprint, mask->selected);
  }
  auto model = fit(spec, x, labels, fingerprint);
  model.task = task;
  model.scaling = params;
  model.mask = mask;
  const fs::path path = !opt.model.empty() ? fs::path(opt.model) : ctx.output("model.json");
  ctx.write(path, model_to_json(model) + "\n");
  ctx.log() << "trained in " << format_double(model.train_seconds) << "s\n";
}

void cmd_predict(Context& ctx) {
  const auto& opt = ctx.opt();
  if (opt.model.empty()) throw ConfigError("--model is required");
  if (opt.data.empty()) throw ConfigError("--data is required");
  const auto model = load_model(opt.model);
  std::ifstream in(opt.data);
  if (!in) throw DataError("cannot open " + opt.data);
  const auto schema = ctx.schema();
  const auto table = ingest_features_csv(in, *schema, ctx.columns());
  const auto predictions = predict_batch(model, table.values, schema->fingerprint());
  const auto task = model.task.value_or(Task::category);
  const auto taxonomy = ctx.taxonomy();

  std::ostringstream csv;
  const bool ids = !table.sample_ids.empty();
  csv << (ids ? "SampleId," : "Row,") << "Predicted\n";
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (ids) {
      csv << table.sample_ids[i];
    } else {
      csv << i + 1;
    }
    csv << ',' << taxonomy->label_name(task, predictions[i]) << '\n';
  }
  if (opt.out.empty()) {
    ctx.out() << csv.str();
  } else {
    ctx.write(opt.out, csv.str());
  }
}

void cmd_synth(Context& ctx) {
  const auto& opt = ctx.opt();
  const auto schema = ctx.schema();
  auto spec = default_synthetic_spec(*schema);
  spec.class_count = opt.classes;
  spec.samples_per_class = opt.per_class;
  spec.informative_feature_ids = spread_feature_ids(*schema, opt.informative);
  spec.class_separation = opt.separation;
  spec.noise_scale = opt.noise;
  if (opt.seed) spec.seed = *opt.seed;
  const auto dataset = generate_synthetic(spec, schema, ctx.taxonomy());
  std::ostringstream csv;
  write_csv(csv, dataset);
  ctx.write(ctx.output("synthetic.csv"), csv.str());
}

// ----------------------------------------------------------------- parser

void add_common(CLI::App* cmd, Options& opt) {
  cmd->add_option("--config", opt.config, "JSON file supplying any flag; explicit flags win");
  cmd->add_option("--schema", opt.schema, "Feature schema JSON");
  cmd->add_option("--taxonomy", opt.taxonomy, "Label taxonomy JSON");
  cmd->add_option("--out-dir", opt.out_dir, "Output directory (env MALFAM_OUTPUT_DIR)");
  cmd->add_option("--out", opt.out, "Primary output file");
}

void add_data(CLI::App* cmd, Options& opt) {
  cmd->add_option("--data", opt.data, "Input CSV");
  cmd->add_option("--column-map", opt.column_map, "JSON map from CSV headers to schema names");
}

void add_task(CLI::App* cmd, Options& opt) {
  cmd->add_option("--task", opt.task, "category or family");
}

void add_selection(CLI::App* cmd, Options& opt) {
  cmd->add_option("--method", opt.method, "chi2 or mi");
  cmd->add_option("--bins", opt.bins, "Equal-frequency bins for mi");
}

void add_cv(CLI::App* cmd, Options& opt) {
  cmd->add_option("--k", opt.k, "Folds");
  cmd->add_option("--repeats", opt.repeats, "Repeats averaged");
  cmd->add_option("--scaling", opt.scaling, "fit_on_train_fold or fit_on_full_data");
  cmd->add_option("--selection-policy", opt.selection_policy, "score_on_train_fold or score_on_full_data");
  cmd->add_flag("--same-seed", opt.same_seed, "Reuse the base seed for every repeat");
}

void add_classifier(CLI::App* cmd, Options& opt) {
  cmd->add_option("--classifier", opt.classifier, "J48, RF, KNN, NB, LR or AB");
  cmd->add_option("--param", opt.params, "Hyperparameter name=value")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
}

std::vector<std::string> expand_args(const std::vector<std::string>& args) {
  std::size_t sub = 0;
  while (sub < args.size() && args[sub].starts_with("-")) ++sub;
  if (sub == args.size()) return args;

  std::optional<std::string> config;
  for (std::size_t i = sub + 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
    if (args[i].starts_with("--config=")) config = args[i].substr(9);
  }
  std::vector<std::string> expanded(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub) + 1);
  if (config) {
    const auto tokens = config_tokens(*config);
    expanded.insert(expanded.end(), tokens.begin(), tokens.end());
  }
  if (const char* env = std::getenv("MALFAM_OUTPUT_DIR"); env && *env) {
    expanded.push_back("--out-dir");
    expanded.push_back(env);
  }
  expanded.insert(expanded.end(), args.begin() + static_cast<std::ptrdiff_t>(sub) + 1, args.end());
  return expanded;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options opt;
  CLI::App app{"Android malware category and family classification toolkit", "malfam"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  auto* validate = app.add_subcommand("validate", "Dataset report");
  add_common(validate, opt);
  add_data(validate, opt);

  auto* preprocess = app.add_subcommand("preprocess", "Cleaned, scaled CSV plus scale parameters");
  add_common(preprocess, opt);
  add_data(preprocess, opt);

  auto* rank = app.add_subcommand("rank", "Feature ranking CSV");
  add_common(rank, opt);
  add_data(rank, opt);
  add_task(rank, opt);
  add_selection(rank, opt);

  auto* cv = app.add_subcommand("cv", "Cross-validated metrics for one configuration");
  add_common(cv, opt);
  add_data(cv, opt);
  add_task(cv, opt);
  add_selection(cv, opt);
  add_cv(cv, opt);
  add_classifier(cv, opt);
  cv->add_option("--threshold", opt.threshold, "Percent of features kept; omit for no selection");
  cv->add_option("--seed", opt.seed, "Base seed");

  auto* sweep_cmd = app.add_subcommand("sweep", "Threshold x classifier accuracy grid");
  add_common(sweep_cmd, opt);
  add_data(sweep_cmd, opt);
  add_task(sweep_cmd, opt);
  add_selection(sweep_cmd, opt);
  add_cv(sweep_cmd, opt);
  sweep_cmd->add_option("--seed", opt.seed, "Base seed");

  auto* train = app.add_subcommand("train", "Fit and save a model");
  add_common(train, opt);
  add_data(train, opt);
  add_task(train, opt);
  add_selection(train, opt);
  add_classifier(train, opt);
  train->add_option("--threshold", opt.threshold, "Percent of features kept; omit for no selection");
  train->add_option("--seed", opt.seed, "Classifier seed");
  train->add_option("--model", opt.model, "Model file to write");

  auto* predict = app.add_subcommand("predict", "Label CSV rows with a saved model");
  add_common(predict, opt);
  add_data(predict, opt);
  predict->add_option("--model", opt.model, "Model file");

  auto* synth = app.add_subcommand("synth", "Synthetic dataset CSV");
  add_common(synth, opt);
  synth->add_option("--seed", opt.seed, "Generator seed (default 7)");
  synth->add_option("--classes", opt.classes, "Categories used");
  synth->add_option("--per-class", opt.per_class, "Samples per category");
  synth->add_option("--informative", opt.informative, "Informative features");
  synth->add_option("--separation", opt.separation, "Class mean spacing");
  synth->add_option("--noise", opt.noise, "Noise standard deviation");

  try {
    auto expanded = expand_args(args);
    std::reverse(expanded.begin(), expanded.end());
    app.parse(expanded);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  Context ctx(opt, out, err);
  try {
    const auto* chosen = app.get_subcommands().front();
    const auto& name = chosen->get_name();
    if (name == "validate") cmd_validate(ctx);
    else if (name == "preprocess") cmd_preprocess(ctx);
    else if (name == "rank") cmd_rank(ctx);
    else if (name == "cv") cmd_cv(ctx);
    else if (name == "sweep") cmd_sweep(ctx);
    else if (name == "train") cmd_train(ctx);
    else if (name == "predict") cmd_predict(ctx);
    else if (name == "synth") cmd_synth(ctx);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace malfam

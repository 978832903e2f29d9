#include "mqttids/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

#include "mqttids/rng.hpp"

namespace mqttids {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Rethrows a library error with the name of the stage that raised it.
template <class F>
auto in_stage(std::string_view stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    std::string message = e.what();
    const auto prefix = std::string(to_string(e.kind())) + ": ";
    if (message.starts_with(prefix)) message.erase(0, prefix.size());
    throw Error(e.kind(), std::string(stage) + ": " + message);
  }
}

template <class T>
T config_value(const json& doc, const char* key, T fallback) {
  if (!doc.contains(key)) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::ConfigError, std::string("bad value for '") + key + "'");
  }
}

void reject_unknown_keys(const json& doc, std::initializer_list<std::string_view> known, std::string_view where) {
  if (!doc.is_object()) throw Error(ErrorKind::ConfigError, std::string(where) + " must be an object");
  for (const auto& [key, value] : doc.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorKind::ConfigError, "unknown key '" + key + "' in " + std::string(where));
    }
  }
}

// Re-codes labels of a CSV read back from disk to the run's class coding.
Dataset recode_labels(Dataset ds, const std::vector<std::string>& label_names) {
  std::vector<int> remap(ds.label_names.size());
  for (std::size_t i = 0; i < ds.label_names.size(); ++i) {
    auto it = std::find(label_names.begin(), label_names.end(), ds.label_names[i]);
    if (it == label_names.end()) throw Error(ErrorKind::UnknownClass, ds.label_names[i]);
    remap[i] = static_cast<int>(it - label_names.begin());
  }
  for (int& code : ds.labels) code = remap[static_cast<std::size_t>(code)];
  ds.label_names = label_names;
  ds.labels_encoded = true;
  return ds;
}

Dataset project_names(const Dataset& ds, const std::vector<std::string>& names) {
  return project(ds, FeatureSet{names, FeatureSetProvenance::manual});
}

void require_columns(const Dataset& ds, const std::vector<std::string>& names) {
  for (const auto& name : names) {
    if (!ds.column_index(name)) throw Error(ErrorKind::MissingColumn, name);
  }
}

}  // namespace

std::string to_string(SelectionMode mode) {
  switch (mode) {
    case SelectionMode::golden: return "golden";
    case SelectionMode::consensus: return "consensus";
    case SelectionMode::manual: return "manual";
  }
  return "unknown";
}

SelectionMode selection_mode_from_string(std::string_view name) {
  if (name == "golden") return SelectionMode::golden;
  if (name == "consensus") return SelectionMode::consensus;
  if (name == "manual") return SelectionMode::manual;
  throw Error(ErrorKind::ConfigError, "unknown selection mode '" + std::string(name) + "'");
}

std::uint64_t stage_seed(const RunConfig& config, SeedStream stream) {
  return derive_seed(config.seed, static_cast<std::uint64_t>(stream));
}

void validate(const RunConfig& config) {
  if (!(config.split_ratio > 0.0 && config.split_ratio < 1.0)) {
    throw Error(ErrorKind::ConfigError, "split_ratio must lie strictly between 0 and 1");
  }
  if (config.smote_k < 1) throw Error(ErrorKind::ConfigError, "smote.k must be at least 1");
  if (config.cv_folds < 0) throw Error(ErrorKind::ConfigError, "cv_folds must be non-negative");
  if (config.target_column.empty()) throw Error(ErrorKind::ConfigError, "target_column is empty");
  if (config.selection.n < 1) throw Error(ErrorKind::ConfigError, "selection.n must be at least 1");
  if (config.selection.mode == SelectionMode::manual && config.selection.features.empty()) {
    throw Error(ErrorKind::ConfigError, "manual selection needs a feature list");
  }
  if (config.output_dir.empty()) throw Error(ErrorKind::ConfigError, "output_dir is empty");
}

RunConfig run_config_from_json(const json& doc) {
  reject_unknown_keys(doc,
                      {"dataset", "target_column", "classes", "categorical_columns", "split_ratio", "smote",
                       "selection", "model", "cv_folds", "output_dir", "seed", "synth"},
                      "config");
  RunConfig c;
  c.dataset = config_value<std::string>(doc, "dataset", c.dataset.string());
  c.target_column = config_value(doc, "target_column", c.target_column);
  c.classes = config_value(doc, "classes", c.classes);
  c.categorical_columns = config_value(doc, "categorical_columns", c.categorical_columns);
  c.split_ratio = config_value(doc, "split_ratio", c.split_ratio);
  if (doc.contains("smote")) {
    const json& s = doc["smote"];
    reject_unknown_keys(s, {"enabled", "k"}, "smote");
    c.smote = config_value(s, "enabled", c.smote);
    c.smote_k = config_value(s, "k", c.smote_k);
  }
  if (doc.contains("selection")) {
    const json& s = doc["selection"];
    reject_unknown_keys(s, {"mode", "features", "n", "top_per_method"}, "selection");
    c.selection.mode = selection_mode_from_string(config_value<std::string>(s, "mode", "golden"));
    c.selection.features = config_value(s, "features", c.selection.features);
    c.selection.n = config_value(s, "n", c.selection.n);
    c.selection.top_per_method = config_value(s, "top_per_method", c.selection.top_per_method);
  }
  if (doc.contains("model")) {
    try {
      c.model = method_config_from_json(doc["model"]);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::InvalidHyperparameter) throw;
      throw Error(ErrorKind::ConfigError, e.what());
    }
  }
  c.cv_folds = config_value(doc, "cv_folds", c.cv_folds);
  c.output_dir = config_value<std::string>(doc, "output_dir", c.output_dir.string());
  c.seed = config_value(doc, "seed", c.seed);
  if (doc.contains("synth")) {
    try {
      c.synth = synth_spec_from_json(doc["synth"]);
    } catch (const Error& e) {
      throw Error(ErrorKind::ConfigError, e.what());
    }
  }
  validate(c);
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  try {
    return run_config_from_json(read_json(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::MalformedDocument) throw Error(ErrorKind::ConfigError, e.what());
    throw;
  }
}

json to_json(const RunConfig& c) {
  return {{"dataset", c.dataset.string()},
          {"target_column", c.target_column},
          {"classes", c.classes},
          {"categorical_columns", c.categorical_columns},
          {"split_ratio", c.split_ratio},
          {"smote", {{"enabled", c.smote}, {"k", c.smote_k}}},
          {"selection",
           {{"mode", to_string(c.selection.mode)},
            {"features", c.selection.features},
            {"n", c.selection.n},
            {"top_per_method", c.selection.top_per_method}}},
          {"model", to_json(c.model)},
          {"cv_folds", c.cv_folds},
          {"output_dir", c.output_dir.string()},
          {"seed", c.seed},
          {"synth", to_json(c.synth)}};
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidSpec:
    case ErrorKind::InvalidHyperparameter:
      return 2;
    default:
      return 3;
  }
}

namespace {

Dataset load_filtered(const RunConfig& config) {
  return in_stage("data_ingest", [&] {
    CsvOptions options;
    options.target_column = config.target_column;
    options.categorical_columns = config.categorical_columns;
    Dataset ds = load_csv(config.dataset, options);
    if (!config.classes.empty()) ds = filter_classes(ds, config.classes);
    return encode_class_labels(ds).first;
  });
}

}  // namespace

Dataset load_encoded(const RunConfig& config, const CategoricalEncodingMaps& maps) {
  const Dataset ds = load_filtered(config);
  return in_stage("preprocess", [&] { return apply_categorical_encoding(ds, maps); });
}

PreparedData prepare(const RunConfig& config) {
  validate(config);
  const Dataset ds = load_filtered(config);
  return in_stage("preprocess", [&] {
    PreparedData out;
    auto& a = out.artifacts;
    a.label_names = ds.label_names;
    a.split = stratified_split(ds, config.split_ratio, stage_seed(config, SeedStream::split));
    Dataset train = ds.subset(a.split.train);
    Dataset test = ds.subset(a.split.test);
    a.encoding = fit_categorical_encoding(train, config.categorical_columns);
    train = apply_categorical_encoding(train, a.encoding);
    test = apply_categorical_encoding(test, a.encoding);
    a.scaler = fit_minmax(train);
    train = apply_minmax(a.scaler, train);
    test = apply_minmax(a.scaler, test);
    a.smote_enabled = config.smote;
    a.smote = SmoteConfig{config.smote_k, stage_seed(config, SeedStream::smote)};
    if (config.smote) train = smote_oversample(train, a.smote);
    a.feature_names = train.feature_names();
    out.train = std::move(train);
    out.test = std::move(test);
    return out;
  });
}

void save_prepared(const PreparedData& data, const fs::path& dir) {
  fs::create_directories(dir);
  save_csv(data.train, dir / "train.csv");
  save_csv(data.test, dir / "test.csv");
  write_json(to_json(data.artifacts), dir / "artifacts.json");
}

PreparedData load_prepared(const fs::path& dir) {
  PreparedData data;
  data.artifacts = artifacts_from_json(read_json(dir / "artifacts.json"));
  data.train = recode_labels(load_csv(dir / "train.csv"), data.artifacts.label_names);
  data.test = recode_labels(load_csv(dir / "test.csv"), data.artifacts.label_names);
  return data;
}

SelectionReport select_features(const RunConfig& config, const Dataset& train) {
  return in_stage("feature_select", [&] {
    const auto names = train.feature_names();
    SelectionReport report;
    report.rankings.push_back(kbest_rank(train.rows, train.labels, names, names.size()));
    report.rankings.push_back(pearson_rank(train.rows, train.labels, names));
    report.rankings.push_back(pca_rank(train.rows, names, names.size()));
    switch (config.selection.mode) {
      case SelectionMode::golden:
        report.chosen = golden_final_set();
        break;
      case SelectionMode::consensus:
        report.chosen = consensus_select(report.rankings, config.selection.n, config.selection.top_per_method);
        break;
      case SelectionMode::manual:
        report.chosen = FeatureSet{config.selection.features, FeatureSetProvenance::manual};
        break;
    }
    require_columns(train, report.chosen.names);
    return report;
  });
}

TrainedModel train_model(const MethodConfig& method, const Dataset& train, const FeatureSet& features,
                         std::uint64_t seed) {
  return in_stage(to_string(method.method), [&] {
    const Dataset projected = project(train, features);
    const auto start = std::chrono::steady_clock::now();
    TrainedModel out;
    out.model = fit_method(method, projected.rows, projected.labels, seed, static_cast<int>(train.n_classes()));
    out.fit_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.model.feature_names = features.names;
    return out;
  });
}

double MethodOutcome::accuracy() const {
  if (cv) return cv->summary.at("accuracy").mean;
  if (report) return report->accuracy;
  return 0.0;
}

Comparison compare_methods(const RunConfig& config, const PreparedData& data, const FeatureSet& features) {
  Comparison cmp;
  cmp.features = features;
  cmp.folds = config.cv_folds > 1 ? config.cv_folds : 0;

  std::optional<Dataset> full;
  std::optional<Dataset> test;
  if (cmp.folds > 0) {
    full = project(load_encoded(config, data.artifacts.encoding), features);
  } else {
    test = project(data.test, features);
  }

  for (Method m : all_methods()) {
    MethodOutcome outcome;
    outcome.method = m;
    MethodConfig method = config.model;
    method.method = m;
    try {
      if (full) {
        const CvOptions options{cmp.folds, stage_seed(config, SeedStream::cv), true, config.smote, config.smote_k};
        outcome.cv = in_stage(to_string(m), [&] { return cross_validate(method, *full, options); });
      } else {
        const auto trained = train_model(method, data.train, features, stage_seed(config, SeedStream::model));
        outcome.report = in_stage(to_string(m), [&] { return evaluate(trained.model, *test, trained.fit_time_s); });
      }
    } catch (const std::exception& e) {
      outcome.error = e.what();
    }
    cmp.outcomes.push_back(std::move(outcome));
  }
  return cmp;
}

namespace {

std::vector<const MethodOutcome*> ranked(const Comparison& cmp) {
  std::vector<const MethodOutcome*> order;
  for (const auto& o : cmp.outcomes) {
    if (o.ok()) order.push_back(&o);
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const MethodOutcome* a, const MethodOutcome* b) { return a->accuracy() > b->accuracy(); });
  return order;
}

EvalReport table_report(const MethodOutcome& o) {
  if (o.report) return *o.report;
  const auto& s = o.cv->summary;
  return make_report(o.cv->pooled, s.at("fit_time_s").mean, s.at("predict_time_s").mean);
}

}  // namespace

json to_json(const Comparison& cmp) {
  json methods = json::array();
  for (const auto& o : cmp.outcomes) {
    json entry = {{"method", to_string(o.method)}, {"display_name", display_name(o.method)}};
    if (!o.ok()) {
      entry["status"] = "error";
      entry["error"] = o.error;
    } else {
      entry["status"] = "ok";
      entry["accuracy"] = o.accuracy();
      if (o.cv) entry["cv"] = to_json(*o.cv);
      if (o.report) entry["report"] = to_json(*o.report);
    }
    methods.push_back(std::move(entry));
  }
  json ranking = json::array();
  for (const auto* o : ranked(cmp)) ranking.push_back(to_string(o->method));
  return {{"folds", cmp.folds}, {"features", to_json(cmp.features)}, {"methods", methods}, {"ranking", ranking}};
}

std::string render_markdown(const Comparison& cmp) {
  std::vector<ReportRow> rows;
  for (const auto* o : ranked(cmp)) {
    ReportRow row{display_name(o->method), table_report(*o), std::nullopt};
    if (o->cv) row.accuracy = o->accuracy();
    rows.push_back(std::move(row));
  }
  std::string text = render_markdown(rows);
  if (cmp.folds > 0) {
    text += "\nAccuracy is the mean over " + std::to_string(cmp.folds) +
            " folds; other columns use the pooled confusion matrix and mean fold times.\n";
  }
  bool header = false;
  for (const auto& o : cmp.outcomes) {
    if (o.ok()) continue;
    if (!header) text += "\nFailed methods:\n\n";
    header = true;
    text += "- " + display_name(o.method) + ": " + o.error + "\n";
  }
  return text;
}

void cmd_synth(const SynthSpec& spec, const fs::path& out_csv) {
  const Dataset ds = in_stage("synthgen", [&] { return generate(spec); });
  if (out_csv.has_parent_path()) fs::create_directories(out_csv.parent_path());
  save_csv(ds, out_csv);
}

void cmd_prepare(const RunConfig& config) {
  save_prepared(prepare(config), config.output_dir);
}

void cmd_select(const RunConfig& config) {
  const PreparedData data = load_prepared(config.output_dir);
  write_json(to_json(select_features(config, data.train)), config.output_dir / "selection.json");
}

void cmd_train(const RunConfig& config) {
  const PreparedData data = load_prepared(config.output_dir);
  const fs::path selection = config.output_dir / "selection.json";
  const FeatureSet features = fs::exists(selection)
                                  ? feature_set_from_json(read_json(selection).value("feature_set", json()))
                                  : select_features(config, data.train).chosen;
  const auto trained = train_model(config.model, data.train, features, stage_seed(config, SeedStream::model));
  write_json(to_json(trained.model), config.output_dir / "model.json");
  write_json({{"method", to_string(config.model.method)}, {"fit_time_s", trained.fit_time_s}},
             config.output_dir / "training_time.json");
}

void cmd_evaluate(const fs::path& model_path, const fs::path& prepared_dir, const fs::path& out_dir) {
  const Model model = model_from_json(read_json(model_path));
  const PreparedData data = load_prepared(prepared_dir);
  double fit_time = 0.0;
  const fs::path timing = model_path.parent_path() / "training_time.json";
  if (fs::exists(timing)) fit_time = read_json(timing).value("fit_time_s", 0.0);
  const EvalReport report = in_stage("evaluation", [&] {
    return evaluate(model, project_names(data.test, model.feature_names), fit_time);
  });
  fs::create_directories(out_dir);
  write_json(to_json(report), out_dir / "report.json");
  const ReportRow row{display_name(model.method), report, std::nullopt};
  write_text(render_markdown(std::span<const ReportRow>(&row, 1)), out_dir / "report.md");
}

bool cmd_compare(const RunConfig& config) {
  const PreparedData data = prepare(config);
  save_prepared(data, config.output_dir);
  const SelectionReport selection = select_features(config, data.train);
  write_json(to_json(selection), config.output_dir / "selection.json");
  const Comparison cmp = compare_methods(config, data, selection.chosen);
  write_json(to_json(cmp), config.output_dir / "compare.json");
  write_text(render_markdown(cmp), config.output_dir / "compare.md");
  return std::any_of(cmp.outcomes.begin(), cmp.outcomes.end(), [](const auto& o) { return o.ok(); });
}

void write_json(const json& doc, const fs::path& path) {
  write_text(doc.dump(2) + "\n", path);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::MalformedDocument, path.string() + ": " + e.what());
  }
}

void write_text(const std::string& text, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

}  // namespace mqttids

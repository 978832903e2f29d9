#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mqttids/ensembles.hpp"
#include "mqttids/error.hpp"
#include "mqttids/evaluation.hpp"
#include "mqttids/feature_select.hpp"
#include "mqttids/preprocess.hpp"
#include "mqttids/synthgen.hpp"

namespace mqttids {

enum class SelectionMode { golden, consensus, manual };

std::string to_string(SelectionMode mode);
SelectionMode selection_mode_from_string(std::string_view name);

struct SelectionConfig {
  SelectionMode mode = SelectionMode::golden;
  std::vector<std::string> features;  // manual mode only
  std::size_t n = 10;                 // consensus size
  std::size_t top_per_method = 10;
};

/// One run of the toolkit. All sub-seeds derive from `seed`.
struct RunConfig {
  std::filesystem::path dataset;
  std::string target_column = "target";
  /// Classes to keep; empty keeps every class present.
  std::vector<std::string> classes;
  std::vector<std::string> categorical_columns = mqttset_categorical_columns();
  double split_ratio = 0.8;
  bool smote = true;
  int smote_k = 5;
  SelectionConfig selection;
  MethodConfig model;
  /// Cross-validation folds for compare; 0 or 1 uses the train/test split.
  int cv_folds = 0;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 42;
  SynthSpec synth;
};

/// Fixed offsets used to derive each stage's seed from the master seed.
enum class SeedStream : std::uint64_t { split = 1, smote = 2, model = 3, cv = 4 };
std::uint64_t stage_seed(const RunConfig& config, SeedStream stream);

/// Unknown keys and invalid values raise ConfigError.
RunConfig run_config_from_json(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);
void validate(const RunConfig& config);

/// Exit status for a library error: 2 for configuration and validation
/// problems, 3 for data problems.
int exit_code_for(ErrorKind kind);

struct PreparedData {
  Dataset train;  // scaled, and oversampled when SMOTE is on
  Dataset test;   // scaled with the training parameters
  PreprocessArtifacts artifacts;
};

/// Load, filter, encode, split, scale and oversample as configured.
PreparedData prepare(const RunConfig& config);
/// The filtered, label-encoded, categorically encoded dataset before any split.
Dataset load_encoded(const RunConfig& config, const CategoricalEncodingMaps& maps);

void save_prepared(const PreparedData& data, const std::filesystem::path& dir);
PreparedData load_prepared(const std::filesystem::path& dir);

SelectionReport select_features(const RunConfig& config, const Dataset& train);

struct TrainedModel {
  Model model;
  double fit_time_s = 0.0;
};
TrainedModel train_model(const MethodConfig& method, const Dataset& train, const FeatureSet& features,
                         std::uint64_t seed);

struct MethodOutcome {
  Method method = Method::decision_tree;
  std::optional<EvalReport> report;  // train/test mode
  std::optional<CvReport> cv;        // cross-validation mode
  std::string error;                 // set when the method failed

  bool ok() const { return error.empty(); }
  double accuracy() const;
};

struct Comparison {
  std::vector<MethodOutcome> outcomes;  // fixed method order
  FeatureSet features;
  int folds = 0;
};

Comparison compare_methods(const RunConfig& config, const PreparedData& data, const FeatureSet& features);
nlohmann::json to_json(const Comparison& comparison);
/// Table sorted by accuracy, best first; failed methods are listed after it.
std::string render_markdown(const Comparison& comparison);

// Command entry points. Outputs go to config.output_dir.
void cmd_synth(const SynthSpec& spec, const std::filesystem::path& out_csv);
void cmd_prepare(const RunConfig& config);
void cmd_select(const RunConfig& config);
void cmd_train(const RunConfig& config);
void cmd_evaluate(const std::filesystem::path& model_path, const std::filesystem::path& prepared_dir,
                  const std::filesystem::path& out_dir);
/// Returns false when every method failed.
bool cmd_compare(const RunConfig& config);

void write_json(const nlohmann::json& doc, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);
void write_text(const std::string& text, const std::filesystem::path& path);

}  // namespace mqttids

// Command-line driver: synth, prepare, select, train, evaluate, compare.
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mqttids/pipeline.hpp"

namespace {

using namespace mqttids;

struct Overrides {
  std::string config;
  std::string dataset;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  std::string model;
  std::optional<int> folds;
  std::string selection;
  std::optional<bool> smote;
};

void add_run_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--dataset", o.dataset, "Input CSV (overrides config)");
  cmd->add_option("-o,--output-dir", o.output_dir, "Artifact directory (overrides config)");
  cmd->add_option("--seed", o.seed, "Master seed (overrides config)");
  cmd->add_option("--model", o.model, "Method: random_forest, decision_tree, knn, gbt, stacking, voting, bagging");
  cmd->add_option("--folds", o.folds, "Cross-validation folds for compare");
  cmd->add_option("--selection", o.selection, "Feature selection mode: golden, consensus, manual");
  cmd->add_flag("--smote,!--no-smote", o.smote, "Toggle SMOTE oversampling");
}

RunConfig resolve(const Overrides& o) {
  RunConfig config = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (!o.dataset.empty()) config.dataset = o.dataset;
  if (!o.output_dir.empty()) config.output_dir = o.output_dir;
  if (o.seed) config.seed = *o.seed;
  if (!o.model.empty()) config.model.method = method_from_string(o.model);
  if (o.folds) config.cv_folds = *o.folds;
  if (!o.selection.empty()) config.selection.mode = selection_mode_from_string(o.selection);
  if (o.smote) config.smote = *o.smote;
  validate(config);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MQTT intrusion detection toolkit"};
  app.require_subcommand(1);

  SynthSpec synth;
  std::string synth_config;
  std::string synth_out = "synth.csv";
  std::optional<std::size_t> rows_per_class;
  std::vector<std::string> synth_classes;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic three-class CSV");
  synth_cmd->add_option("-c,--config", synth_config, "Run configuration whose synth section is used")
      ->check(CLI::ExistingFile);
  synth_cmd->add_option("-o,--out", synth_out, "Output CSV path");
  synth_cmd->add_option("--rows-per-class", rows_per_class, "Rows generated for every class");
  synth_cmd->add_option("--classes", synth_classes, "Class names")->delimiter(',');
  synth_cmd->add_option("--features", synth.n_features, "Number of feature columns");
  synth_cmd->add_option("--separation", synth.separation, "Class mean gap in standard deviations");
  synth_cmd->add_option("--seed", synth.seed, "Generator seed");

  Overrides run;
  auto* prepare_cmd = app.add_subcommand("prepare", "Encode, split, scale and balance a dataset");
  auto* select_cmd = app.add_subcommand("select", "Rank features and choose the final set");
  auto* train_cmd = app.add_subcommand("train", "Train one method on the prepared data");
  auto* compare_cmd = app.add_subcommand("compare", "Train and evaluate all seven methods");
  for (auto* cmd : {prepare_cmd, select_cmd, train_cmd, compare_cmd}) add_run_options(cmd, run);

  std::string model_path;
  std::string prepared_dir;
  std::string report_dir;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a trained model on the prepared test set");
  evaluate_cmd->add_option("-m,--model-file", model_path, "Model JSON")->required();
  evaluate_cmd->add_option("-p,--prepared", prepared_dir, "Prepared artifact directory")->required();
  evaluate_cmd->add_option("-o,--output-dir", report_dir, "Report directory (defaults to --prepared)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (*synth_cmd) {
      if (!synth_config.empty()) {
        const SynthSpec from_file = load_run_config(synth_config).synth;
        // Explicit flags still win over the file.
        if (synth_cmd->count("--features") == 0) synth.n_features = from_file.n_features;
        if (synth_cmd->count("--separation") == 0) synth.separation = from_file.separation;
        if (synth_cmd->count("--seed") == 0) synth.seed = from_file.seed;
        synth.rows_per_class = from_file.rows_per_class;
        synth.feature_names = from_file.feature_names;
      }
      if (!synth_classes.empty()) {
        synth.rows_per_class.clear();
        for (const auto& c : synth_classes) synth.rows_per_class.emplace_back(c, 1000);
      }
      if (rows_per_class) {
        for (auto& entry : synth.rows_per_class) entry.second = *rows_per_class;
      }
      cmd_synth(synth, synth_out);
      std::cout << "wrote " << synth_out << "\n";
    } else if (*prepare_cmd) {
      const auto config = resolve(run);
      cmd_prepare(config);
      std::cout << "prepared data in " << config.output_dir.string() << "\n";
    } else if (*select_cmd) {
      const auto config = resolve(run);
      cmd_select(config);
      std::cout << "wrote " << (config.output_dir / "selection.json").string() << "\n";
    } else if (*train_cmd) {
      const auto config = resolve(run);
      cmd_train(config);
      std::cout << "wrote " << (config.output_dir / "model.json").string() << "\n";
    } else if (*evaluate_cmd) {
      const std::filesystem::path out = report_dir.empty() ? prepared_dir : report_dir;
      cmd_evaluate(model_path, prepared_dir, out);
      std::cout << "wrote " << (out / "report.md").string() << "\n";
    } else if (*compare_cmd) {
      const auto config = resolve(run);
      const bool any_ok = cmd_compare(config);
      std::cout << "wrote " << (config.output_dir / "compare.md").string() << "\n";
      if (!any_ok) {
        std::cerr << "mqttids compare: every method failed\n";
        return 3;
      }
    }
  } catch (const Error& e) {
    std::cerr << "mqttids " << name << ": " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "mqttids " << name << ": IoError: " << e.what() << "\n";
    return 3;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "mqttids " << name << ": MalformedDocument: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "mqttids " << name << ": internal error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}

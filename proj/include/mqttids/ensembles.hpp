#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "mqttids/classifiers.hpp"

namespace mqttids {

struct StackingModel {
  std::vector<FittedClassifier> base_models;  // refit on the full training set
  FittedClassifier meta_model;
  int oof_folds = 5;
  int n_classes = 0;
  /// One entry per meta-feature column: "<base kind>:p<class>".
  std::vector<std::string> meta_feature_layout;
};

struct OofMetaFeatures {
  Matrix features;                  // n x (bases * n_classes)
  std::vector<int> fold_of_row;
  std::vector<int> times_predicted;  // how often each row received a prediction
};

/// Out-of-fold base-model probabilities: every row is predicted once, by
/// models trained on the other folds.
OofMetaFeatures build_oof_meta_features(const Matrix& x, std::span<const int> y,
                                        std::span<const ClassifierSpec> base_specs, int folds,
                                        std::uint64_t seed, int n_classes);

StackingModel fit_stacking(const Matrix& x, std::span<const int> y,
                           std::span<const ClassifierSpec> base_specs, const ClassifierSpec& meta_spec,
                           int folds, std::uint64_t seed, int n_classes = 0);
Matrix stacking_meta_features(const StackingModel& model, const Matrix& x);
std::vector<int> predict_stacking(const StackingModel& model, const Matrix& x);

struct VotingModel {
  std::vector<FittedClassifier> members;
  int n_classes = 0;
};

VotingModel fit_voting(const Matrix& x, std::span<const int> y, std::span<const ClassifierSpec> specs,
                       int n_classes = 0);
/// Hard vote; ties go to the lowest class code.
std::vector<int> predict_voting(const VotingModel& model, const Matrix& x);

struct BaggingModel {
  std::vector<FittedClassifier> bags;
  std::vector<std::uint64_t> bootstrap_seeds;
  int n_classes = 0;
};

struct BaggingOptions {
  /// Test hook: train every bag on the unmodified training set.
  bool identity_sample = false;
  /// Test hook: give every bag the base spec's own seed.
  bool reuse_base_seed = false;
};

BaggingModel fit_bagging(const Matrix& x, std::span<const int> y, const ClassifierSpec& base_spec,
                         int n_bags, std::uint64_t seed, const BaggingOptions& options = {},
                         int n_classes = 0);
std::vector<int> predict_bagging(const BaggingModel& model, const Matrix& x);

/// The seven methods compared by the toolkit, in report order.
enum class Method { random_forest, decision_tree, knn, gbt, stacking, voting, bagging };

std::string to_string(Method method);
/// Short display name used in report tables (RF, DT, KNN, XGBoost, ...).
std::string display_name(Method method);
Method method_from_string(std::string_view name);
const std::vector<Method>& all_methods();

struct MethodConfig {
  Method method = Method::stacking;
  /// Per-kind overrides applied to base learners (and single-model methods).
  std::map<ClassifierKind, Hyperparameters> base;
  /// Overrides for the stacking meta-learner (a random forest).
  Hyperparameters meta;
  /// Overrides for the random forest inside each bag.
  Hyperparameters bagging_base;
  int stacking_folds = 5;
  int bagging_bags = 10;
};

/// Base learners in fixed order RF, DT, KNN, GBT with seeds derived from seed.
std::vector<ClassifierSpec> base_specs(const MethodConfig& config, std::uint64_t seed);

/// Any trained method behind one interface.
struct Model {
  Method method = Method::decision_tree;
  std::variant<FittedClassifier, StackingModel, VotingModel, BaggingModel> impl;
  std::vector<std::string> feature_names;
  int n_classes = 0;
  std::size_t n_features = 0;
};

Model fit_method(const MethodConfig& config, const Matrix& x, std::span<const int> y, std::uint64_t seed,
                 int n_classes = 0);
std::vector<int> predict(const Model& model, const Matrix& x);

nlohmann::json to_json(const Model& model);
Model model_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const MethodConfig& config);
MethodConfig method_config_from_json(const nlohmann::json& doc);

}  // namespace mqttids

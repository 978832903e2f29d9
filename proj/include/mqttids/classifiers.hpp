#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "mqttids/matrix.hpp"

namespace mqttids {

enum class ClassifierKind { decision_tree, random_forest, knn, gbt };

std::string to_string(ClassifierKind kind);
ClassifierKind classifier_kind_from_string(std::string_view name);

/// Named numeric hyperparameters. Integers and flags are stored as doubles
/// and validated per kind.
using Hyperparameters = std::map<std::string, double>;

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::decision_tree;
  Hyperparameters hyperparameters;  // overrides on top of the kind's defaults
  std::uint64_t seed = 0;
};

Hyperparameters default_hyperparameters(ClassifierKind kind);

/// Defaults merged with overrides. Throws InvalidHyperparameter on unknown
/// names or out-of-range values.
Hyperparameters resolve_hyperparameters(ClassifierKind kind, const Hyperparameters& overrides);

/// Flat binary tree. Internal nodes send x[feature] <= threshold left.
/// Leaves carry a value vector: class probabilities for classification
/// trees, a single additive score for boosting trees.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> value;
  int predicted = 0;

  bool is_leaf() const noexcept { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const TreeNode& leaf_for(std::span<const double> x) const;
  std::size_t depth() const;
};

struct DecisionTreeModel {
  Tree tree;
};

struct RandomForestModel {
  std::vector<Tree> trees;
  std::size_t max_features = 0;
};

struct KnnModel {
  Matrix points;
  std::vector<int> labels;
  std::size_t k = 5;
};

struct GbtModel {
  std::vector<std::vector<Tree>> rounds;  // rounds[r][class]
  double learning_rate = 0.1;
  std::vector<double> initial_scores;
  /// Mean training cross-entropy after each round.
  std::vector<double> training_loss;
};

struct FittedClassifier {
  ClassifierKind kind = ClassifierKind::decision_tree;
  Hyperparameters hyperparameters;
  int n_classes = 0;
  std::size_t n_features = 0;
  std::vector<std::string> feature_names;
  std::variant<DecisionTreeModel, RandomForestModel, KnnModel, GbtModel> model;
};

/// Options for a single CART classification tree.
struct TreeOptions {
  int max_depth = 0;  // 0 = unlimited
  std::size_t min_samples_split = 2;
  double min_impurity_decrease = 0.0;
  std::size_t max_features = 0;  // 0 = all features
  std::uint64_t seed = 0;
};

/// Grows a Gini CART tree on the given sample (row ids, repeats allowed).
Tree grow_classification_tree(const Matrix& x, std::span<const int> y,
                              std::span<const std::size_t> sample, int n_classes,
                              const TreeOptions& options);

/// n_classes == 0 means max(y) + 1.
FittedClassifier fit(const ClassifierSpec& spec, const Matrix& x, std::span<const int> y,
                     int n_classes = 0);

std::vector<int> predict(const FittedClassifier& model, const Matrix& x);
Matrix predict_proba(const FittedClassifier& model, const Matrix& x);

/// Index of the largest entry, lowest index on ties.
int argmax_lowest(std::span<const double> values);

/// Modal class among votes, lowest code on ties.
int majority_vote(std::span<const int> votes, int n_classes);

inline constexpr std::string_view kModelVersion = "mqttids-model/1";

nlohmann::json to_json(const FittedClassifier& model);
FittedClassifier classifier_from_json(const nlohmann::json& doc);

}  // namespace mqttids

#include <functional>

#include "mqttids/classifiers.hpp"
#include "mqttids/error.hpp"

namespace mqttids {

namespace {

using nlohmann::json;

json node_to_json(const Tree& tree, int index) {
  const TreeNode& node = tree.nodes.at(static_cast<std::size_t>(index));
  if (node.is_leaf()) return {{"value", node.value}, {"predicted", node.predicted}};
  return {{"feature", node.feature},
          {"threshold", node.threshold},
          {"left", node_to_json(tree, node.left)},
          {"right", node_to_json(tree, node.right)}};
}

json tree_to_json(const Tree& tree) { return node_to_json(tree, 0); }

Tree tree_from_json(const json& doc) {
  Tree tree;
  std::function<int(const json&)> build = [&](const json& j) -> int {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (j.contains("feature")) {
      const int feature = j.at("feature").get<int>();
      const double threshold = j.at("threshold").get<double>();
      const int left = build(j.at("left"));
      const int right = build(j.at("right"));
      TreeNode& node = tree.nodes[id];
      node.feature = feature;
      node.threshold = threshold;
      node.left = left;
      node.right = right;
    } else {
      TreeNode& node = tree.nodes[id];
      node.value = j.at("value").get<std::vector<double>>();
      node.predicted = j.at("predicted").get<int>();
    }
    return id;
  };
  build(doc);
  return tree;
}

void check_tree(const Tree& tree, std::size_t n_features, std::size_t value_width) {
  for (const auto& node : tree.nodes) {
    if (node.is_leaf()) {
      if (node.value.size() != value_width) {
        throw Error(ErrorKind::MalformedDocument, "leaf value has wrong width");
      }
    } else if (static_cast<std::size_t>(node.feature) >= n_features) {
      throw Error(ErrorKind::MalformedDocument, "split feature out of range");
    }
  }
}

}  // namespace

nlohmann::json to_json(const FittedClassifier& model) {
  json payload;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DecisionTreeModel>) {
          payload = {{"tree", tree_to_json(m.tree)}};
        } else if constexpr (std::is_same_v<T, RandomForestModel>) {
          json trees = json::array();
          for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
          payload = {{"max_features", m.max_features}, {"trees", trees}};
        } else if constexpr (std::is_same_v<T, KnnModel>) {
          payload = {{"k", m.k},
                     {"rows", m.points.rows()},
                     {"cols", m.points.cols()},
                     {"points", m.points.data()},
                     {"labels", m.labels}};
        } else {
          json rounds = json::array();
          for (const auto& round : m.rounds) {
            json per_class = json::array();
            for (const auto& t : round) per_class.push_back(tree_to_json(t));
            rounds.push_back(per_class);
          }
          payload = {{"learning_rate", m.learning_rate},
                     {"initial_scores", m.initial_scores},
                     {"training_loss", m.training_loss},
                     {"rounds", rounds}};
        }
      },
      model.model);
  return {{"version", kModelVersion},
          {"kind", to_string(model.kind)},
          {"hyperparameters", model.hyperparameters},
          {"n_classes", model.n_classes},
          {"n_features", model.n_features},
          {"feature_names", model.feature_names},
          {"payload", payload}};
}

FittedClassifier classifier_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.empty()) throw Error(ErrorKind::MalformedDocument, "empty model document");
  if (!doc.contains("version")) throw Error(ErrorKind::MalformedDocument, "model document has no version");
  if (!doc["version"].is_string() || doc["version"].get<std::string>() != kModelVersion) {
    throw Error(ErrorKind::VersionMismatch, "unsupported model version " + doc["version"].dump());
  }
  try {
    FittedClassifier out;
    out.kind = classifier_kind_from_string(doc.at("kind").get<std::string>());
    out.hyperparameters = resolve_hyperparameters(out.kind, doc.at("hyperparameters").get<Hyperparameters>());
    out.n_classes = doc.at("n_classes").get<int>();
    out.n_features = doc.at("n_features").get<std::size_t>();
    out.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    if (out.n_classes < 1) throw Error(ErrorKind::MalformedDocument, "n_classes must be >= 1");
    const auto k = static_cast<std::size_t>(out.n_classes);
    const json& payload = doc.at("payload");
    switch (out.kind) {
      case ClassifierKind::decision_tree: {
        DecisionTreeModel m{tree_from_json(payload.at("tree"))};
        check_tree(m.tree, out.n_features, k);
        out.model = std::move(m);
        break;
      }
      case ClassifierKind::random_forest: {
        RandomForestModel m;
        m.max_features = payload.at("max_features").get<std::size_t>();
        for (const auto& t : payload.at("trees")) {
          m.trees.push_back(tree_from_json(t));
          check_tree(m.trees.back(), out.n_features, k);
        }
        if (m.trees.empty()) throw Error(ErrorKind::MalformedDocument, "forest without trees");
        out.model = std::move(m);
        break;
      }
      case ClassifierKind::knn: {
        KnnModel m;
        m.k = payload.at("k").get<std::size_t>();
        m.points = Matrix(payload.at("rows").get<std::size_t>(), payload.at("cols").get<std::size_t>(),
                          payload.at("points").get<std::vector<double>>());
        m.labels = payload.at("labels").get<std::vector<int>>();
        if (m.labels.size() != m.points.rows() || m.points.cols() != out.n_features || m.k == 0 ||
            m.labels.empty()) {
          throw Error(ErrorKind::MalformedDocument, "inconsistent knn payload");
        }
        for (int label : m.labels) {
          if (label < 0 || label >= out.n_classes) throw Error(ErrorKind::MalformedDocument, "knn label out of range");
        }
        out.model = std::move(m);
        break;
      }
      case ClassifierKind::gbt: {
        GbtModel m;
        m.learning_rate = payload.at("learning_rate").get<double>();
        m.initial_scores = payload.at("initial_scores").get<std::vector<double>>();
        m.training_loss = payload.at("training_loss").get<std::vector<double>>();
        for (const auto& round : payload.at("rounds")) {
          std::vector<Tree> per_class;
          for (const auto& t : round) {
            per_class.push_back(tree_from_json(t));
            check_tree(per_class.back(), out.n_features, 1);
          }
          if (per_class.size() != k) throw Error(ErrorKind::MalformedDocument, "round width differs from n_classes");
          m.rounds.push_back(std::move(per_class));
        }
        if (m.initial_scores.size() != k) throw Error(ErrorKind::MalformedDocument, "initial score width");
        out.model = std::move(m);
        break;
      }
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedDocument, std::string("model: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::MalformedDocument) throw;
    throw Error(ErrorKind::MalformedDocument, e.what());
  }
}

}  // namespace mqttids

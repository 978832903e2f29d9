#include "mqttids/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mqttids/error.hpp"
#include "mqttids/parallel.hpp"
#include "mqttids/rng.hpp"
#include "tree_grower.hpp"

namespace mqttids {

namespace {

struct ParamRule {
  double default_value;
  double min_value;
  bool integral;
};

const std::map<std::string, ParamRule>& rules_for(ClassifierKind kind) {
  static const std::map<std::string, ParamRule> tree = {
      {"max_depth", {0, 0, true}},
      {"min_samples_split", {2, 2, true}},
      {"min_impurity_decrease", {0.0, 0.0, false}},
      {"max_features", {0, 0, true}},
  };
  static const std::map<std::string, ParamRule> forest = {
      {"n_trees", {100, 1, true}},
      {"bootstrap", {1, 0, true}},
      {"max_depth", {0, 0, true}},
      {"min_samples_split", {2, 2, true}},
      {"min_impurity_decrease", {0.0, 0.0, false}},
      {"max_features", {0, 0, true}},
  };
  static const std::map<std::string, ParamRule> knn = {
      {"k", {5, 1, true}},
  };
  static const std::map<std::string, ParamRule> gbt = {
      {"n_rounds", {100, 1, true}},
      {"learning_rate", {0.1, 0.0, false}},
      {"max_depth", {6, 1, true}},
      {"lambda", {1.0, 0.0, false}},
      {"min_child_weight", {1.0, 0.0, false}},
      {"gamma", {0.0, 0.0, false}},
  };
  switch (kind) {
    case ClassifierKind::decision_tree: return tree;
    case ClassifierKind::random_forest: return forest;
    case ClassifierKind::knn: return knn;
    case ClassifierKind::gbt: return gbt;
  }
  return tree;
}

std::size_t as_size(const Hyperparameters& hp, const std::string& name) {
  return static_cast<std::size_t>(hp.at(name));
}

int infer_classes(std::span<const int> y, int n_classes) {
  int max_code = -1;
  for (int c : y) {
    if (c < 0) throw Error(ErrorKind::CodeOutOfRange, "negative label code");
    max_code = std::max(max_code, c);
  }
  if (n_classes == 0) return max_code + 1;
  if (max_code >= n_classes) {
    throw Error(ErrorKind::CodeOutOfRange, "label code " + std::to_string(max_code) +
                                               " for " + std::to_string(n_classes) + " classes");
  }
  return n_classes;
}

void check_width(const FittedClassifier& model, const Matrix& x) {
  if (x.cols() != model.n_features) {
    throw Error(ErrorKind::DimensionMismatch, "model expects " + std::to_string(model.n_features) +
                                                  " features, got " + std::to_string(x.cols()));
  }
}

TreeOptions tree_options(const Hyperparameters& hp, std::uint64_t seed) {
  TreeOptions opt;
  opt.max_depth = static_cast<int>(hp.at("max_depth"));
  opt.min_samples_split = as_size(hp, "min_samples_split");
  opt.min_impurity_decrease = hp.at("min_impurity_decrease");
  opt.max_features = as_size(hp, "max_features");
  opt.seed = seed;
  return opt;
}

Tree grow_on(const detail::ColumnData& cols, std::span<const int> y, std::span<const std::size_t> sample,
             int n_classes, const TreeOptions& options) {
  detail::GiniCriterion crit(y, sample, n_classes, options.min_impurity_decrease);
  detail::GrowLimits limits{options.max_depth, options.min_samples_split, options.max_features, options.seed};
  return detail::grow_tree(cols, sample, crit, limits);
}

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> p(scores.begin(), scores.end());
  const double top = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& v : p) {
    v = std::exp(v - top);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

GbtModel fit_gbt(const Hyperparameters& hp, const Matrix& x, std::span<const int> y, int n_classes) {
  const std::size_t n = x.rows();
  const std::size_t k = static_cast<std::size_t>(n_classes);
  GbtModel model;
  model.learning_rate = hp.at("learning_rate");
  model.initial_scores.assign(k, 0.0);

  const detail::ColumnData cols(x);
  std::vector<std::size_t> sample(n);
  std::iota(sample.begin(), sample.end(), 0);
  const detail::GrowLimits limits{static_cast<int>(hp.at("max_depth")), 2, 0, 0};

  std::vector<double> scores(n * k, 0.0);
  std::vector<std::vector<double>> grad(k, std::vector<double>(n));
  std::vector<std::vector<double>> hess(k, std::vector<double>(n));
  const auto rounds = as_size(hp, "n_rounds");
  for (std::size_t r = 0; r < rounds; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = softmax(std::span<const double>(scores.data() + i * k, k));
      for (std::size_t c = 0; c < k; ++c) {
        const double target = y[i] == static_cast<int>(c) ? 1.0 : 0.0;
        grad[c][i] = p[c] - target;
        hess[c][i] = std::max(p[c] * (1.0 - p[c]), 1e-16);
      }
    }
    std::vector<Tree> round(k);
    parallel_for(k, [&](std::size_t c) {
      detail::NewtonCriterion crit(grad[c], hess[c], sample, hp.at("lambda"), hp.at("min_child_weight"),
                                   hp.at("gamma"), model.learning_rate);
      round[c] = detail::grow_tree(cols, sample, crit, limits);
    });
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = x.row(i);
      for (std::size_t c = 0; c < k; ++c) scores[i * k + c] += round[c].leaf_for(row).value[0];
      const auto p = softmax(std::span<const double>(scores.data() + i * k, k));
      loss -= std::log(std::max(p[y[i]], 1e-300));
    }
    model.training_loss.push_back(loss / static_cast<double>(n));
    model.rounds.push_back(std::move(round));
  }
  return model;
}

std::vector<double> gbt_scores(const GbtModel& model, std::span<const double> row) {
  std::vector<double> scores = model.initial_scores;
  for (const auto& round : model.rounds) {
    for (std::size_t c = 0; c < round.size(); ++c) scores[c] += round[c].leaf_for(row).value[0];
  }
  return scores;
}

}  // namespace

std::string to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::decision_tree: return "decision_tree";
    case ClassifierKind::random_forest: return "random_forest";
    case ClassifierKind::knn: return "knn";
    case ClassifierKind::gbt: return "gbt";
  }
  return "unknown";
}

ClassifierKind classifier_kind_from_string(std::string_view name) {
  if (name == "decision_tree" || name == "dt") return ClassifierKind::decision_tree;
  if (name == "random_forest" || name == "rf") return ClassifierKind::random_forest;
  if (name == "knn") return ClassifierKind::knn;
  if (name == "gbt" || name == "xgboost") return ClassifierKind::gbt;
  throw Error(ErrorKind::InvalidHyperparameter, "unknown classifier kind '" + std::string(name) + "'");
}

Hyperparameters default_hyperparameters(ClassifierKind kind) {
  Hyperparameters hp;
  for (const auto& [name, rule] : rules_for(kind)) hp[name] = rule.default_value;
  return hp;
}

Hyperparameters resolve_hyperparameters(ClassifierKind kind, const Hyperparameters& overrides) {
  const auto& rules = rules_for(kind);
  Hyperparameters hp = default_hyperparameters(kind);
  for (const auto& [name, value] : overrides) {
    auto rule = rules.find(name);
    if (rule == rules.end()) {
      throw Error(ErrorKind::InvalidHyperparameter, "'" + name + "' is not a " + to_string(kind) + " hyperparameter");
    }
    if (!std::isfinite(value) || value < rule->second.min_value ||
        (rule->second.integral && value != std::floor(value))) {
      throw Error(ErrorKind::InvalidHyperparameter, name + " = " + std::to_string(value));
    }
    hp[name] = value;
  }
  if (kind == ClassifierKind::random_forest && hp["bootstrap"] > 1) {
    throw Error(ErrorKind::InvalidHyperparameter, "bootstrap must be 0 or 1");
  }
  if (kind == ClassifierKind::gbt && hp["learning_rate"] <= 0.0) {
    throw Error(ErrorKind::InvalidHyperparameter, "learning_rate must be > 0");
  }
  return hp;
}

const TreeNode& Tree::leaf_for(std::span<const double> x) const {
  const TreeNode* node = &nodes.front();
  while (!node->is_leaf()) {
    node = &nodes[x[node->feature] <= node->threshold ? node->left : node->right];
  }
  return *node;
}

std::size_t Tree::depth() const {
  std::vector<std::size_t> depth(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, depth[i]);
    if (!nodes[i].is_leaf()) {
      depth[nodes[i].left] = depth[i] + 1;
      depth[nodes[i].right] = depth[i] + 1;
    }
  }
  return deepest;
}

Tree grow_classification_tree(const Matrix& x, std::span<const int> y, std::span<const std::size_t> sample,
                              int n_classes, const TreeOptions& options) {
  const detail::ColumnData cols(x);
  return grow_on(cols, y, sample, n_classes, options);
}

int argmax_lowest(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = static_cast<int>(i);
  }
  return best;
}

int majority_vote(std::span<const int> votes, int n_classes) {
  std::vector<int> counts(static_cast<std::size_t>(n_classes), 0);
  for (int v : votes) {
    if (v < 0 || v >= n_classes) throw Error(ErrorKind::CodeOutOfRange, "vote " + std::to_string(v));
    ++counts[v];
  }
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

FittedClassifier fit(const ClassifierSpec& spec, const Matrix& x, std::span<const int> y, int n_classes) {
  if (x.rows() == 0) throw Error(ErrorKind::EmptyDataset, "cannot fit on zero rows");
  if (y.size() != x.rows()) throw Error(ErrorKind::LengthMismatch, "labels do not match rows");

  FittedClassifier out;
  out.kind = spec.kind;
  out.hyperparameters = resolve_hyperparameters(spec.kind, spec.hyperparameters);
  out.n_classes = infer_classes(y, n_classes);
  out.n_features = x.cols();
  const auto& hp = out.hyperparameters;

  switch (spec.kind) {
    case ClassifierKind::decision_tree: {
      std::vector<std::size_t> sample(x.rows());
      std::iota(sample.begin(), sample.end(), 0);
      out.model = DecisionTreeModel{grow_classification_tree(x, y, sample, out.n_classes, tree_options(hp, spec.seed))};
      break;
    }
    case ClassifierKind::random_forest: {
      RandomForestModel forest;
      const std::size_t d = x.cols();
      const std::size_t requested = as_size(hp, "max_features");
      forest.max_features = requested == 0
                                ? static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))))
                                : std::min(requested, d);
      const bool bootstrap = hp.at("bootstrap") != 0.0;
      const std::size_t n_trees = as_size(hp, "n_trees");
      const detail::ColumnData cols(x);
      forest.trees.resize(n_trees);
      parallel_for(n_trees, [&](std::size_t t) {
        const std::uint64_t tree_seed = derive_seed(spec.seed, t);
        std::vector<std::size_t> sample(x.rows());
        if (bootstrap) {
          Rng rng(derive_seed(tree_seed, 0x5eed));
          for (auto& s : sample) s = static_cast<std::size_t>(rng.below(x.rows()));
        } else {
          std::iota(sample.begin(), sample.end(), 0);
        }
        TreeOptions opt = tree_options(hp, tree_seed);
        opt.max_features = forest.max_features;
        forest.trees[t] = grow_on(cols, y, sample, out.n_classes, opt);
      });
      out.model = std::move(forest);
      break;
    }
    case ClassifierKind::knn: {
      KnnModel knn;
      knn.points = x;
      knn.labels.assign(y.begin(), y.end());
      knn.k = as_size(hp, "k");
      out.model = std::move(knn);
      break;
    }
    case ClassifierKind::gbt:
      out.model = fit_gbt(hp, x, y, out.n_classes);
      break;
  }
  return out;
}

Matrix predict_proba(const FittedClassifier& model, const Matrix& x) {
  check_width(model, x);
  const auto k = static_cast<std::size_t>(model.n_classes);
  Matrix proba(x.rows(), k);

  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DecisionTreeModel>) {
          for (std::size_t i = 0; i < x.rows(); ++i) {
            const auto& leaf = m.tree.leaf_for(x.row(i));
            std::copy(leaf.value.begin(), leaf.value.end(), proba.row(i).begin());
          }
        } else if constexpr (std::is_same_v<T, RandomForestModel>) {
          const double share = 1.0 / static_cast<double>(m.trees.size());
          for (std::size_t i = 0; i < x.rows(); ++i) {
            auto out = proba.row(i);
            for (const auto& tree : m.trees) {
              const auto& leaf = tree.leaf_for(x.row(i));
              for (std::size_t c = 0; c < k; ++c) out[c] += leaf.value[c];
            }
            for (double& v : out) v *= share;
          }
        } else if constexpr (std::is_same_v<T, KnnModel>) {
          const std::size_t n = m.points.rows();
          const std::size_t kk = std::min(m.k, n);
          const std::size_t chunk = 256;
          const std::size_t chunks = (x.rows() + chunk - 1) / chunk;
          parallel_for(chunks, [&](std::size_t b) {
            std::vector<std::pair<double, std::size_t>> dist(n);
            for (std::size_t i = b * chunk; i < std::min(x.rows(), (b + 1) * chunk); ++i) {
              const auto q = x.row(i);
              for (std::size_t r = 0; r < n; ++r) {
                const auto p = m.points.row(r);
                double s = 0.0;
                for (std::size_t j = 0; j < q.size(); ++j) {
                  const double diff = q[j] - p[j];
                  s += diff * diff;
                }
                dist[r] = {s, r};
              }
              std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk - 1), dist.end());
              auto out = proba.row(i);
              for (std::size_t t = 0; t < kk; ++t) out[m.labels[dist[t].second]] += 1.0;
              for (double& v : out) v /= static_cast<double>(kk);
            }
          });
        } else {
          for (std::size_t i = 0; i < x.rows(); ++i) {
            const auto p = softmax(gbt_scores(m, x.row(i)));
            std::copy(p.begin(), p.end(), proba.row(i).begin());
          }
        }
      },
      model.model);
  return proba;
}

std::vector<int> predict(const FittedClassifier& model, const Matrix& x) {
  const Matrix proba = predict_proba(model, x);
  std::vector<int> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = argmax_lowest(proba.row(i));
  return out;
}

}  // namespace mqttids

#include "mqttids/ensembles.hpp"

#include <algorithm>
#include <numeric>

#include "mqttids/error.hpp"
#include "mqttids/preprocess.hpp"
#include "mqttids/rng.hpp"

namespace mqttids {

namespace {

using nlohmann::json;

int resolve_classes(std::span<const int> y, int n_classes) {
  int max_code = -1;
  for (int c : y) max_code = std::max(max_code, c);
  return n_classes > 0 ? n_classes : max_code + 1;
}

void check_width(std::size_t expected, const Matrix& x) {
  if (x.cols() != expected) {
    throw Error(ErrorKind::DimensionMismatch,
                "model expects " + std::to_string(expected) + " features, got " + std::to_string(x.cols()));
  }
}

std::vector<int> vote_rows(const std::vector<std::vector<int>>& per_member, std::size_t rows, int n_classes) {
  std::vector<int> out(rows);
  std::vector<int> votes(per_member.size());
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t m = 0; m < per_member.size(); ++m) votes[m] = per_member[m][i];
    out[i] = majority_vote(votes, n_classes);
  }
  return out;
}

constexpr std::uint64_t kMetaSeedSlot = 100;
constexpr std::uint64_t kFoldSeedSlot = 200;
constexpr std::uint64_t kBagSeedSlot = 300;

}  // namespace

OofMetaFeatures build_oof_meta_features(const Matrix& x, std::span<const int> y,
                                        std::span<const ClassifierSpec> base_specs, int folds,
                                        std::uint64_t seed, int n_classes) {
  if (folds < 2) throw Error(ErrorKind::InvalidSpec, "stacking needs at least 2 folds");
  if (base_specs.empty()) throw Error(ErrorKind::InvalidSpec, "stacking needs base learners");
  const auto k = static_cast<std::size_t>(n_classes);
  OofMetaFeatures oof;
  oof.fold_of_row = stratified_folds(y, folds, seed);
  oof.features = Matrix(x.rows(), base_specs.size() * k);
  oof.times_predicted.assign(x.rows(), 0);

  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> held_rows;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      (oof.fold_of_row[i] == f ? held_rows : train_rows).push_back(i);
    }
    const Matrix x_train = x.select_rows(train_rows);
    const Matrix x_held = x.select_rows(held_rows);
    std::vector<int> y_train;
    y_train.reserve(train_rows.size());
    for (std::size_t i : train_rows) y_train.push_back(y[i]);

    for (std::size_t b = 0; b < base_specs.size(); ++b) {
      const auto model = fit(base_specs[b], x_train, y_train, n_classes);
      const Matrix proba = predict_proba(model, x_held);
      for (std::size_t r = 0; r < held_rows.size(); ++r) {
        for (std::size_t c = 0; c < k; ++c) oof.features(held_rows[r], b * k + c) = proba(r, c);
      }
    }
    for (std::size_t i : held_rows) ++oof.times_predicted[i];
  }
  return oof;
}

StackingModel fit_stacking(const Matrix& x, std::span<const int> y, std::span<const ClassifierSpec> base_specs,
                           const ClassifierSpec& meta_spec, int folds, std::uint64_t seed, int n_classes) {
  StackingModel model;
  model.n_classes = resolve_classes(y, n_classes);
  model.oof_folds = folds;
  const auto oof = build_oof_meta_features(x, y, base_specs, folds, seed, model.n_classes);
  model.meta_model = fit(meta_spec, oof.features, y, model.n_classes);
  for (const auto& spec : base_specs) {
    model.base_models.push_back(fit(spec, x, y, model.n_classes));
    for (int c = 0; c < model.n_classes; ++c) {
      model.meta_feature_layout.push_back(to_string(spec.kind) + ":p" + std::to_string(c));
    }
  }
  return model;
}

Matrix stacking_meta_features(const StackingModel& model, const Matrix& x) {
  const auto k = static_cast<std::size_t>(model.n_classes);
  Matrix meta(x.rows(), model.base_models.size() * k);
  for (std::size_t b = 0; b < model.base_models.size(); ++b) {
    const Matrix proba = predict_proba(model.base_models[b], x);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t c = 0; c < k; ++c) meta(i, b * k + c) = proba(i, c);
    }
  }
  return meta;
}

std::vector<int> predict_stacking(const StackingModel& model, const Matrix& x) {
  return predict(model.meta_model, stacking_meta_features(model, x));
}

VotingModel fit_voting(const Matrix& x, std::span<const int> y, std::span<const ClassifierSpec> specs,
                       int n_classes) {
  if (specs.size() < 2) throw Error(ErrorKind::InvalidSpec, "voting needs at least two members");
  VotingModel model;
  model.n_classes = resolve_classes(y, n_classes);
  for (const auto& spec : specs) model.members.push_back(fit(spec, x, y, model.n_classes));
  return model;
}

std::vector<int> predict_voting(const VotingModel& model, const Matrix& x) {
  std::vector<std::vector<int>> per_member;
  for (const auto& m : model.members) per_member.push_back(predict(m, x));
  return vote_rows(per_member, x.rows(), model.n_classes);
}

BaggingModel fit_bagging(const Matrix& x, std::span<const int> y, const ClassifierSpec& base_spec, int n_bags,
                         std::uint64_t seed, const BaggingOptions& options, int n_classes) {
  if (n_bags < 1) throw Error(ErrorKind::InvalidSpec, "bagging needs at least one bag");
  BaggingModel model;
  model.n_classes = resolve_classes(y, n_classes);
  for (int b = 0; b < n_bags; ++b) {
    const std::uint64_t bag_seed = derive_seed(seed, static_cast<std::uint64_t>(b));
    ClassifierSpec spec = base_spec;
    if (!options.reuse_base_seed) spec.seed = derive_seed(bag_seed, 1);
    if (options.identity_sample) {
      model.bags.push_back(fit(spec, x, y, model.n_classes));
    } else {
      Rng rng(bag_seed);
      std::vector<std::size_t> rows(x.rows());
      for (auto& r : rows) r = static_cast<std::size_t>(rng.below(x.rows()));
      std::vector<int> y_bag;
      y_bag.reserve(rows.size());
      for (std::size_t r : rows) y_bag.push_back(y[r]);
      model.bags.push_back(fit(spec, x.select_rows(rows), y_bag, model.n_classes));
    }
    model.bootstrap_seeds.push_back(bag_seed);
  }
  return model;
}

std::vector<int> predict_bagging(const BaggingModel& model, const Matrix& x) {
  std::vector<std::vector<int>> per_bag;
  for (const auto& m : model.bags) per_bag.push_back(predict(m, x));
  return vote_rows(per_bag, x.rows(), model.n_classes);
}

std::string to_string(Method method) {
  switch (method) {
    case Method::random_forest: return "random_forest";
    case Method::decision_tree: return "decision_tree";
    case Method::knn: return "knn";
    case Method::gbt: return "gbt";
    case Method::stacking: return "stacking";
    case Method::voting: return "voting";
    case Method::bagging: return "bagging";
  }
  return "unknown";
}

std::string display_name(Method method) {
  switch (method) {
    case Method::random_forest: return "RF";
    case Method::decision_tree: return "DT";
    case Method::knn: return "KNN";
    case Method::gbt: return "XGBoost";
    case Method::stacking: return "Stacking";
    case Method::voting: return "Voting";
    case Method::bagging: return "Bagging";
  }
  return "unknown";
}

Method method_from_string(std::string_view name) {
  for (Method m : all_methods()) {
    if (name == to_string(m)) return m;
  }
  if (name == "rf") return Method::random_forest;
  if (name == "dt") return Method::decision_tree;
  if (name == "xgboost") return Method::gbt;
  throw Error(ErrorKind::InvalidHyperparameter, "unknown method '" + std::string(name) + "'");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = {Method::random_forest, Method::decision_tree, Method::knn,
                                              Method::gbt,           Method::stacking,      Method::voting,
                                              Method::bagging};
  return methods;
}

std::vector<ClassifierSpec> base_specs(const MethodConfig& config, std::uint64_t seed) {
  static const ClassifierKind order[] = {ClassifierKind::random_forest, ClassifierKind::decision_tree,
                                         ClassifierKind::knn, ClassifierKind::gbt};
  std::vector<ClassifierSpec> specs;
  for (std::size_t i = 0; i < std::size(order); ++i) {
    ClassifierSpec spec;
    spec.kind = order[i];
    auto it = config.base.find(order[i]);
    if (it != config.base.end()) spec.hyperparameters = it->second;
    spec.seed = derive_seed(seed, i);
    specs.push_back(std::move(spec));
  }
  return specs;
}

Model fit_method(const MethodConfig& config, const Matrix& x, std::span<const int> y, std::uint64_t seed,
                 int n_classes) {
  Model model;
  model.method = config.method;
  model.n_classes = resolve_classes(y, n_classes);
  model.n_features = x.cols();
  const auto specs = base_specs(config, seed);
  auto single = [&](std::size_t index) { return fit(specs[index], x, y, model.n_classes); };

  switch (config.method) {
    case Method::random_forest: model.impl = single(0); break;
    case Method::decision_tree: model.impl = single(1); break;
    case Method::knn: model.impl = single(2); break;
    case Method::gbt: model.impl = single(3); break;
    case Method::stacking: {
      ClassifierSpec meta{ClassifierKind::random_forest, config.meta, derive_seed(seed, kMetaSeedSlot)};
      model.impl = fit_stacking(x, y, specs, meta, config.stacking_folds, derive_seed(seed, kFoldSeedSlot),
                                model.n_classes);
      break;
    }
    case Method::voting: model.impl = fit_voting(x, y, specs, model.n_classes); break;
    case Method::bagging: {
      ClassifierSpec base{ClassifierKind::random_forest, config.bagging_base, 0};
      model.impl = fit_bagging(x, y, base, config.bagging_bags, derive_seed(seed, kBagSeedSlot), {},
                               model.n_classes);
      break;
    }
  }
  return model;
}

std::vector<int> predict(const Model& model, const Matrix& x) {
  check_width(model.n_features, x);
  return std::visit(
      [&](const auto& m) -> std::vector<int> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, FittedClassifier>) {
          return predict(m, x);
        } else if constexpr (std::is_same_v<T, StackingModel>) {
          return predict_stacking(m, x);
        } else if constexpr (std::is_same_v<T, VotingModel>) {
          return predict_voting(m, x);
        } else {
          return predict_bagging(m, x);
        }
      },
      model.impl);
}

nlohmann::json to_json(const Model& model) {
  if (const auto* single = std::get_if<FittedClassifier>(&model.impl)) {
    json doc = to_json(*single);
    doc["feature_names"] = model.feature_names;
    return doc;
  }
  json doc = {{"version", kModelVersion},
              {"kind", to_string(model.method)},
              {"n_classes", model.n_classes},
              {"n_features", model.n_features},
              {"feature_names", model.feature_names}};
  auto members_json = [](const std::vector<FittedClassifier>& members) {
    json arr = json::array();
    for (const auto& m : members) arr.push_back(to_json(m));
    return arr;
  };
  if (const auto* s = std::get_if<StackingModel>(&model.impl)) {
    doc["hyperparameters"] = {{"folds", s->oof_folds}};
    doc["payload"] = {{"base_models", members_json(s->base_models)},
                      {"meta_model", to_json(s->meta_model)},
                      {"meta_feature_layout", s->meta_feature_layout}};
  } else if (const auto* v = std::get_if<VotingModel>(&model.impl)) {
    doc["hyperparameters"] = {{"mode", "hard"}};
    doc["payload"] = {{"members", members_json(v->members)}};
  } else if (const auto* b = std::get_if<BaggingModel>(&model.impl)) {
    doc["hyperparameters"] = {{"n_bags", b->bags.size()}};
    doc["payload"] = {{"bags", members_json(b->bags)}, {"bootstrap_seeds", b->bootstrap_seeds}};
  }
  return doc;
}

Model model_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.empty()) throw Error(ErrorKind::MalformedDocument, "empty model document");
  if (!doc.contains("version")) throw Error(ErrorKind::MalformedDocument, "model document has no version");
  if (!doc["version"].is_string() || doc["version"].get<std::string>() != kModelVersion) {
    throw Error(ErrorKind::VersionMismatch, "unsupported model version " + doc["version"].dump());
  }
  try {
    const auto kind = doc.at("kind").get<std::string>();
    Model model;
    model.method = method_from_string(kind);
    model.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    model.n_classes = doc.at("n_classes").get<int>();
    model.n_features = doc.at("n_features").get<std::size_t>();

    auto members = [](const json& arr) {
      std::vector<FittedClassifier> out;
      for (const auto& m : arr) out.push_back(classifier_from_json(m));
      return out;
    };
    const auto check_members = [&](const std::vector<FittedClassifier>& ms, std::size_t width) {
      for (const auto& m : ms) {
        if (m.n_features != width || m.n_classes != model.n_classes) {
          throw Error(ErrorKind::MalformedDocument, "member shape disagrees with ensemble");
        }
      }
    };

    switch (model.method) {
      case Method::random_forest:
      case Method::decision_tree:
      case Method::knn:
      case Method::gbt:
        model.impl = classifier_from_json(doc);
        break;
      case Method::stacking: {
        StackingModel s;
        const json& payload = doc.at("payload");
        s.base_models = members(payload.at("base_models"));
        s.meta_model = classifier_from_json(payload.at("meta_model"));
        s.meta_feature_layout = payload.at("meta_feature_layout").get<std::vector<std::string>>();
        s.oof_folds = doc.at("hyperparameters").at("folds").get<int>();
        s.n_classes = model.n_classes;
        check_members(s.base_models, model.n_features);
        if (s.base_models.empty() ||
            s.meta_model.n_features != s.base_models.size() * static_cast<std::size_t>(model.n_classes)) {
          throw Error(ErrorKind::MalformedDocument, "meta-learner width disagrees with layout");
        }
        model.impl = std::move(s);
        break;
      }
      case Method::voting: {
        VotingModel v;
        v.members = members(doc.at("payload").at("members"));
        v.n_classes = model.n_classes;
        check_members(v.members, model.n_features);
        if (v.members.size() < 2) throw Error(ErrorKind::MalformedDocument, "voting needs two members");
        model.impl = std::move(v);
        break;
      }
      case Method::bagging: {
        BaggingModel b;
        b.bags = members(doc.at("payload").at("bags"));
        b.bootstrap_seeds = doc.at("payload").at("bootstrap_seeds").get<std::vector<std::uint64_t>>();
        b.n_classes = model.n_classes;
        check_members(b.bags, model.n_features);
        if (b.bags.empty()) throw Error(ErrorKind::MalformedDocument, "bagging needs a bag");
        model.impl = std::move(b);
        break;
      }
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedDocument, std::string("model: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::MalformedDocument || e.kind() == ErrorKind::VersionMismatch) throw;
    throw Error(ErrorKind::MalformedDocument, e.what());
  }
}

nlohmann::json to_json(const MethodConfig& config) {
  json base = json::object();
  for (const auto& [kind, hp] : config.base) base[to_string(kind)] = hp;
  return {{"kind", to_string(config.method)},
          {"hyperparameters", base},
          {"meta", config.meta},
          {"bagging_base", config.bagging_base},
          {"stacking_folds", config.stacking_folds},
          {"bagging_bags", config.bagging_bags}};
}

MethodConfig method_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error(ErrorKind::ConfigError, "model section must be an object");
  static const std::vector<std::string> known = {"kind",         "hyperparameters", "meta",
                                                 "bagging_base", "stacking_folds",  "bagging_bags"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorKind::ConfigError, "unknown model key '" + key + "'");
    }
  }
  try {
    MethodConfig config;
    if (doc.contains("kind")) config.method = method_from_string(doc["kind"].get<std::string>());
    if (doc.contains("hyperparameters")) {
      for (const auto& [kind, hp] : doc["hyperparameters"].items()) {
        const auto k = classifier_kind_from_string(kind);
        config.base[k] = hp.get<Hyperparameters>();
        resolve_hyperparameters(k, config.base[k]);
      }
    }
    if (doc.contains("meta")) {
      config.meta = doc["meta"].get<Hyperparameters>();
      resolve_hyperparameters(ClassifierKind::random_forest, config.meta);
    }
    if (doc.contains("bagging_base")) {
      config.bagging_base = doc["bagging_base"].get<Hyperparameters>();
      resolve_hyperparameters(ClassifierKind::random_forest, config.bagging_base);
    }
    config.stacking_folds = doc.value("stacking_folds", 5);
    config.bagging_bags = doc.value("bagging_bags", 10);
    if (config.stacking_folds < 2) throw Error(ErrorKind::InvalidHyperparameter, "stacking_folds must be >= 2");
    if (config.bagging_bags < 1) throw Error(ErrorKind::InvalidHyperparameter, "bagging_bags must be >= 1");
    return config;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("model section: ") + e.what());
  }
}

}  // namespace mqttids

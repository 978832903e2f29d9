#include "mqttids/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mqttids/error.hpp"
#include "mqttids/feature_select.hpp"
#include "mqttids/rng.hpp"

namespace mqttids {

namespace {

constexpr std::uint64_t kLayoutStream = 0;
constexpr std::uint64_t kSampleStream = 1;
constexpr std::uint64_t kShuffleStream = 2;

}  // namespace

std::vector<std::string> default_synth_feature_names(std::size_t n_features) {
  std::vector<std::string> names = golden_final_set().names;
  for (const auto& name : mqttset_feature_names()) {
    if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
  }
  for (std::size_t i = names.size(); i < n_features; ++i) names.push_back("feature_" + std::to_string(i));
  names.resize(n_features);
  return names;
}

void validate(const SynthSpec& spec) {
  if (spec.rows_per_class.empty()) throw Error(ErrorKind::InvalidSpec, "synth spec has no classes");
  std::set<std::string> seen;
  for (const auto& [name, count] : spec.rows_per_class) {
    if (name.empty()) throw Error(ErrorKind::InvalidSpec, "synth class name is empty");
    if (!seen.insert(name).second) throw Error(ErrorKind::InvalidSpec, "duplicate synth class '" + name + "'");
    if (count < 1) throw Error(ErrorKind::InvalidSpec, "class '" + name + "' needs at least one row");
  }
  if (spec.n_features < 2) throw Error(ErrorKind::InvalidSpec, "synth data needs at least 2 features");
  if (!std::isfinite(spec.separation) || spec.separation < 0.0) {
    throw Error(ErrorKind::InvalidSpec, "separation must be finite and non-negative");
  }
  if (!spec.feature_names.empty()) {
    if (spec.feature_names.size() != spec.n_features) {
      throw Error(ErrorKind::InvalidSpec, "feature_names must have n_features entries");
    }
    std::set<std::string> names(spec.feature_names.begin(), spec.feature_names.end());
    if (names.size() != spec.feature_names.size() || names.count("") > 0) {
      throw Error(ErrorKind::InvalidSpec, "feature names must be unique and non-empty");
    }
  }
}

Dataset generate(const SynthSpec& spec) {
  validate(spec);
  const std::size_t k = spec.rows_per_class.size();
  const std::size_t d = spec.n_features;
  const auto names = spec.feature_names.empty() ? default_synth_feature_names(d) : spec.feature_names;

  // Per feature: class c sits at offset + scale * separation * perm[c], so
  // neighbouring classes are exactly `separation` standard deviations apart.
  Rng layout(derive_seed(spec.seed, kLayoutStream));
  std::vector<std::vector<double>> centre(d, std::vector<double>(k));
  std::vector<double> scale(d);
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    layout.shuffle(std::span<std::size_t>(perm));
    const double offset = -10.0 + 20.0 * layout.uniform();
    scale[j] = 0.5 + 4.5 * layout.uniform();
    for (std::size_t c = 0; c < k; ++c) {
      centre[j][c] = offset + scale[j] * spec.separation * static_cast<double>(perm[c]);
    }
  }

  std::vector<int> cls;
  for (std::size_t c = 0; c < k; ++c) cls.insert(cls.end(), spec.rows_per_class[c].second, static_cast<int>(c));
  Rng order(derive_seed(spec.seed, kShuffleStream));
  order.shuffle(std::span<int>(cls));

  Dataset ds;
  for (std::size_t j = 0; j < d; ++j) ds.schema.push_back({names[j], ColumnKind::numeric, j});
  ds.rows = Matrix(cls.size(), d);
  std::vector<int> code_of(k, -1);
  Rng sample(derive_seed(spec.seed, kSampleStream));
  for (std::size_t i = 0; i < cls.size(); ++i) {
    const auto c = static_cast<std::size_t>(cls[i]);
    for (std::size_t j = 0; j < d; ++j) ds.rows(i, j) = centre[j][c] + scale[j] * sample.normal();
    if (code_of[c] < 0) {
      code_of[c] = static_cast<int>(ds.label_names.size());
      ds.label_names.push_back(spec.rows_per_class[c].first);
    }
    ds.labels.push_back(code_of[c]);
  }
  ds.validate();
  return ds;
}

nlohmann::json to_json(const SynthSpec& spec) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& [name, count] : spec.rows_per_class) classes.push_back({{"name", name}, {"rows", count}});
  nlohmann::json doc = {{"classes", classes},
                        {"n_features", spec.n_features},
                        {"separation", spec.separation},
                        {"seed", spec.seed}};
  if (!spec.feature_names.empty()) doc["feature_names"] = spec.feature_names;
  return doc;
}

SynthSpec synth_spec_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error(ErrorKind::ConfigError, "synth spec must be an object");
  for (const auto& [key, value] : doc.items()) {
    if (key != "classes" && key != "n_features" && key != "separation" && key != "seed" &&
        key != "feature_names") {
      throw Error(ErrorKind::ConfigError, "unknown synth key '" + key + "'");
    }
  }
  try {
    SynthSpec spec;
    if (doc.contains("classes")) {
      spec.rows_per_class.clear();
      for (const auto& c : doc["classes"]) {
        spec.rows_per_class.emplace_back(c.at("name").get<std::string>(), c.at("rows").get<std::size_t>());
      }
    }
    spec.n_features = doc.value("n_features", spec.n_features);
    spec.separation = doc.value("separation", spec.separation);
    spec.seed = doc.value("seed", spec.seed);
    if (doc.contains("feature_names")) spec.feature_names = doc["feature_names"].get<std::vector<std::string>>();
    validate(spec);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("synth spec: ") + e.what());
  }
}

}  // namespace mqttids

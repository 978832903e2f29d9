#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mqttids/data_ingest.hpp"

namespace mqttids {

/// Parameters of a synthetic MQTT-shaped dataset: one Gaussian blob per class.
struct SynthSpec {
  std::vector<std::pair<std::string, std::size_t>> rows_per_class = {
      {"legitimate", 1000}, {"dos", 1000}, {"bruteforce", 1000}};
  std::size_t n_features = 10;
  /// Gap between neighbouring class means on every feature, in units of the
  /// within-class standard deviation.
  double separation = 4.0;
  std::uint64_t seed = 42;
  /// Optional explicit column names; must have n_features entries.
  std::vector<std::string> feature_names;
};

/// Column names used when the spec does not name them: the ten-feature final
/// set first, then the remaining MQTTset columns, then feature_<i>.
std::vector<std::string> default_synth_feature_names(std::size_t n_features);

void validate(const SynthSpec& spec);

/// Rows are shuffled; labels are interned in first-appearance order, which is
/// exactly what load_csv reproduces when the output is read back.
Dataset generate(const SynthSpec& spec);

nlohmann::json to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const nlohmann::json& doc);

}  // namespace mqttids

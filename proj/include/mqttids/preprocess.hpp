#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mqttids/data_ingest.hpp"

namespace mqttids {

struct CategoricalEncodingMaps {
  /// column name -> (raw value -> code). Codes are dense from 0 in sorted
  /// order of the raw values; the unknown code of a column is its map size.
  std::map<std::string, std::map<std::string, int>> columns;

  int unknown_code(const std::string& column) const {
    return static_cast<int>(columns.at(column).size());
  }
};

CategoricalEncodingMaps fit_categorical_encoding(const Dataset& ds,
                                                 std::span<const std::string> columns);
Dataset apply_categorical_encoding(const Dataset& ds, const CategoricalEncodingMaps& maps);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  double ratio = 0.8;
  std::uint64_t seed = 0;
};

/// Per-class shuffled split. Train quotas use largest-remainder rounding so
/// that |train| == round(ratio * n) and every class is within one row of
/// ratio * class_count. Both index lists are returned sorted.
SplitIndices stratified_split(std::span<const int> labels, double ratio, std::uint64_t seed);
SplitIndices stratified_split(const Dataset& ds, double ratio, std::uint64_t seed);

/// Fold id per row, stratified: each class is shuffled and dealt round-robin.
/// Throws FoldTooSmall when a class has fewer rows than folds.
std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed);

struct ScalerParams {
  std::vector<std::string> columns;
  std::vector<double> min;
  std::vector<double> max;
};

ScalerParams fit_minmax(const Dataset& ds);
Dataset apply_minmax(const ScalerParams& params, const Dataset& ds);
ScalerParams fit_minmax(const Matrix& x, std::vector<std::string> columns);
Matrix apply_minmax(const ScalerParams& params, const Matrix& x);

struct SmoteConfig {
  int k_neighbors = 5;
  std::uint64_t seed = 0;
};

/// Provenance of one synthetic row: row = base + gap * (neighbor - base),
/// with base and neighbor indices into the input dataset.
struct SyntheticOrigin {
  std::size_t base = 0;
  std::size_t neighbor = 0;
  double gap = 0.0;
};

struct SmoteResult {
  Dataset data;  // originals first, in input order, then synthetic rows
  std::vector<SyntheticOrigin> origins;
};

SmoteResult smote_oversample_traced(const Dataset& ds, const SmoteConfig& cfg);
Dataset smote_oversample(const Dataset& ds, const SmoteConfig& cfg);

/// Everything needed to replay preprocessing of a run.
struct PreprocessArtifacts {
  std::vector<std::string> label_names;
  CategoricalEncodingMaps encoding;
  ScalerParams scaler;
  SplitIndices split;
  bool smote_enabled = true;
  SmoteConfig smote;
  std::vector<std::string> feature_names;
};

nlohmann::json to_json(const CategoricalEncodingMaps& maps);
nlohmann::json to_json(const ScalerParams& params);
nlohmann::json to_json(const SplitIndices& split);
nlohmann::json to_json(const PreprocessArtifacts& artifacts);
PreprocessArtifacts artifacts_from_json(const nlohmann::json& doc);

}  // namespace mqttids

#pragma once

#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mqttids/data_ingest.hpp"
#include "mqttids/matrix.hpp"

namespace mqttids {

enum class RankMethod { kbest, pcc, pca };
std::string to_string(RankMethod method);

struct RankedEntry {
  std::string name;
  double score = 0.0;
  std::size_t position = 0;  // column position in the ranked matrix
};

struct RankedFeatures {
  RankMethod method = RankMethod::kbest;
  std::vector<RankedEntry> entries;  // descending score, ties by position

  std::vector<std::string> names() const;
};

/// Score for a feature with zero within-class spread but distinct class means.
inline constexpr double kInfiniteScore = std::numeric_limits<double>::infinity();

enum class FeatureSetProvenance { golden, consensus, manual };
std::string to_string(FeatureSetProvenance provenance);

struct FeatureSet {
  std::vector<std::string> names;
  FeatureSetProvenance provenance = FeatureSetProvenance::manual;
};

struct PcaModel {
  Matrix components;  // one principal direction per row
  std::vector<double> explained_variance_ratio;
  std::vector<double> explained_variance;
  std::vector<double> column_means;
};

/// One-way ANOVA F statistic per column.
std::vector<double> anova_f_scores(const Matrix& x, std::span<const int> y);
/// |Pearson r| between each column and the label codes; 0 for constant columns.
std::vector<double> pearson_scores(const Matrix& x, std::span<const int> y);

RankedFeatures kbest_rank(const Matrix& x, std::span<const int> y,
                          std::span<const std::string> names, std::size_t k);
RankedFeatures pearson_rank(const Matrix& x, std::span<const int> y,
                            std::span<const std::string> names);

/// Covariance eigendecomposition. Components are sign-normalised so each
/// row's largest-magnitude loading is positive.
PcaModel pca_fit(const Matrix& x, std::size_t n_components);
Matrix pca_transform(const PcaModel& model, const Matrix& x);

/// Importance = sum over retained components of ratio * |loading|, where the
/// retained components are those whose cumulative ratio stays <= 0.95 (at
/// least one).
std::vector<double> pca_importance(const Matrix& x);
RankedFeatures pca_rank(const Matrix& x, std::span<const std::string> names, std::size_t k);

FeatureSet consensus_select(std::span<const RankedFeatures> reports, std::size_t n,
                            std::size_t top_per_method = 10);

FeatureSet golden_final_set();

Dataset project(const Dataset& ds, const FeatureSet& fs);

struct SelectionReport {
  std::vector<RankedFeatures> rankings;
  FeatureSet chosen;
};

nlohmann::json to_json(const RankedFeatures& ranked);
nlohmann::json to_json(const FeatureSet& fs);
nlohmann::json to_json(const SelectionReport& report);
FeatureSet feature_set_from_json(const nlohmann::json& doc);

/// Symmetric eigendecomposition by cyclic Jacobi rotations. Returns
/// eigenvalues in descending order and the matching unit eigenvectors as
/// matrix rows.
std::pair<std::vector<double>, Matrix> symmetric_eigen(const Matrix& a);

}  // namespace mqttids

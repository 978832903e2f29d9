#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mqttids/matrix.hpp"

namespace mqttids {

enum class ColumnKind { numeric, categorical };

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  std::size_t position = 0;

  friend bool operator==(const ColumnSchema&, const ColumnSchema&) = default;
};

/// Feature matrix plus class labels.
///
/// Labels are always stored as indices into label_names. Straight out of
/// load_csv the names are interned in order of first appearance
/// (labels_encoded == false); encode_class_labels replaces that with the
/// canonical class coding.
///
/// Categorical columns keep their raw text in categorical_text until
/// apply_categorical_encoding replaces them with codes. While the text is
/// present, the matrix holds a provisional first-appearance code.
struct Dataset {
  std::vector<ColumnSchema> schema;
  Matrix rows;
  std::vector<int> labels;
  std::vector<std::string> label_names;
  bool labels_encoded = false;
  std::map<std::string, std::vector<std::string>> categorical_text;

  std::size_t size() const noexcept { return rows.rows(); }
  std::size_t width() const noexcept { return schema.size(); }
  std::size_t n_classes() const noexcept { return label_names.size(); }

  std::vector<std::string> feature_names() const;
  std::optional<std::size_t> column_index(std::string_view name) const;
  const std::string& label_name(std::size_t row) const { return label_names.at(labels.at(row)); }

  /// Rows in the given order; schema, label coding and categorical text follow.
  Dataset subset(std::span<const std::size_t> row_indices) const;

  /// Throws if any structural invariant is broken.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct LabelEncoding {
  std::map<std::string, int> mapping;
  std::vector<std::string> inverse;

  int code(std::string_view name) const;
  const std::string& name(int code) const { return inverse.at(static_cast<std::size_t>(code)); }
};

struct CsvOptions {
  std::string target_column = "target";
  std::vector<std::string> categorical_columns;
  /// Columns that must appear in the header besides the target.
  std::vector<std::string> required_columns;
};

/// The 33 feature columns of the reduced MQTTset CSV.
const std::vector<std::string>& mqttset_feature_names();
/// Columns label-encoded by the reference pipeline.
const std::vector<std::string>& mqttset_categorical_columns();
/// Strict options for the reduced MQTTset CSV: all 33 features required.
CsvOptions mqttset_options();

/// Parses a JSON schema document:
/// {"target": "target", "columns": [{"name": "...", "kind": "numeric"|"categorical"}]}
CsvOptions schema_from_json(std::string_view json_text);
CsvOptions load_schema(const std::filesystem::path& path);

std::string normalize_class_name(std::string_view raw);

Dataset parse_csv(std::istream& in, const CsvOptions& options);
Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {});

/// Writes the dataset in the dialect parse_csv reads. Doubles use the
/// shortest representation that round-trips exactly.
void write_csv(const Dataset& ds, std::ostream& out, std::string_view target_column = "target");
void save_csv(const Dataset& ds, const std::filesystem::path& path,
              std::string_view target_column = "target");

Dataset filter_classes(const Dataset& ds, std::span<const std::string> keep);

/// {bruteforce: 0, dos: 1, legitimate: 2} when exactly those three classes are
/// present, otherwise lexicographic order of the distinct names.
std::pair<Dataset, LabelEncoding> encode_class_labels(const Dataset& ds);

std::string format_double(double value);

}  // namespace mqttids

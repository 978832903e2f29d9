#include "mqttids/data_ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "mqttids/error.hpp"

namespace mqttids {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_record(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  if (quoted) {
    throw Error(ErrorKind::ParseError, "row " + std::to_string(line_no) + ": unterminated quote");
  }
  fields.push_back(std::move(current));
  return fields;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

std::optional<double> parse_number(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

}  // namespace

std::vector<std::string> Dataset::feature_names() const {
  std::vector<std::string> names;
  names.reserve(schema.size());
  for (const auto& col : schema) names.push_back(col.name);
  return names;
}

std::optional<std::size_t> Dataset::column_index(std::string_view name) const {
  for (const auto& col : schema) {
    if (col.name == name) return col.position;
  }
  return std::nullopt;
}

Dataset Dataset::subset(std::span<const std::size_t> row_indices) const {
  Dataset out;
  out.schema = schema;
  out.rows = rows.select_rows(row_indices);
  out.labels.reserve(row_indices.size());
  for (std::size_t i : row_indices) out.labels.push_back(labels.at(i));
  out.label_names = label_names;
  out.labels_encoded = labels_encoded;
  for (const auto& [name, text] : categorical_text) {
    auto& dst = out.categorical_text[name];
    dst.reserve(row_indices.size());
    for (std::size_t i : row_indices) dst.push_back(text.at(i));
  }
  return out;
}

void Dataset::validate() const {
  if (rows.cols() != schema.size() && rows.rows() > 0) {
    throw Error(ErrorKind::SchemaMismatch, "matrix width differs from schema size");
  }
  if (labels.size() != rows.rows()) {
    throw Error(ErrorKind::LengthMismatch, "label count differs from row count");
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (schema[i].position != i) throw Error(ErrorKind::SchemaMismatch, "non-contiguous positions");
    if (!seen.insert(schema[i].name).second) {
      throw Error(ErrorKind::SchemaMismatch, "duplicate column name " + schema[i].name);
    }
  }
  for (double v : rows.data()) {
    if (!std::isfinite(v)) throw Error(ErrorKind::ParseError, "non-finite value in dataset");
  }
  for (int code : labels) {
    if (code < 0 || static_cast<std::size_t>(code) >= label_names.size()) {
      throw Error(ErrorKind::CodeOutOfRange, "label code " + std::to_string(code));
    }
  }
}

int LabelEncoding::code(std::string_view name) const {
  auto it = mapping.find(normalize_class_name(name));
  if (it == mapping.end()) throw Error(ErrorKind::UnknownClass, std::string(name));
  return it->second;
}

const std::vector<std::string>& mqttset_feature_names() {
  static const std::vector<std::string> names = {
      "tcp.flags",
      "tcp.time_delta",
      "tcp.len",
      "mqtt.conack.flags",
      "mqtt.conack.flags.reserved",
      "mqtt.conack.flags.sp",
      "mqtt.conack.val",
      "mqtt.conflag.cleansess",
      "mqtt.conflag.passwd",
      "mqtt.conflag.qos",
      "mqtt.conflag.reserved",
      "mqtt.conflag.retain",
      "mqtt.conflag.uname",
      "mqtt.conflag.willflag",
      "mqtt.conflags",
      "mqtt.dupflag",
      "mqtt.hdrflags",
      "mqtt.kalive",
      "mqtt.len",
      "mqtt.msg",
      "mqtt.msgid",
      "mqtt.msgtype",
      "mqtt.proto_len",
      "mqtt.protoname",
      "mqtt.qos",
      "mqtt.retain",
      "mqtt.sub.qos",
      "mqtt.suback.qos",
      "mqtt.ver",
      "mqtt.willmsg",
      "mqtt.willmsg_len",
      "mqtt.willtopic",
      "mqtt.willtopic_len",
  };
  return names;
}

const std::vector<std::string>& mqttset_categorical_columns() {
  static const std::vector<std::string> names = {"tcp.flags", "mqtt.msg", "mqtt.conack.flags",
                                                 "mqtt.hdrflags"};
  return names;
}

CsvOptions mqttset_options() {
  CsvOptions options;
  options.target_column = "target";
  options.categorical_columns = mqttset_categorical_columns();
  options.required_columns = mqttset_feature_names();
  return options;
}

CsvOptions schema_from_json(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedDocument, std::string("schema: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("columns") || !doc["columns"].is_array()) {
    throw Error(ErrorKind::MalformedDocument, "schema needs a \"columns\" array");
  }
  CsvOptions options;
  if (doc.contains("target")) options.target_column = doc["target"].get<std::string>();
  for (const auto& col : doc["columns"]) {
    if (!col.is_object() || !col.contains("name")) {
      throw Error(ErrorKind::MalformedDocument, "schema column needs a name");
    }
    auto name = col["name"].get<std::string>();
    const std::string kind = col.value("kind", "numeric");
    if (kind == "categorical") {
      options.categorical_columns.push_back(name);
    } else if (kind != "numeric") {
      throw Error(ErrorKind::MalformedDocument, "unknown column kind " + kind);
    }
    options.required_columns.push_back(std::move(name));
  }
  return options;
}

CsvOptions load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open schema " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return schema_from_json(buffer.str());
}

std::string normalize_class_name(std::string_view raw) {
  std::string out(trim(raw));
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

Dataset parse_csv(std::istream& in, const CsvOptions& options) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::EmptyDataset, "missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  auto header = split_record(line, 1);
  for (auto& h : header) h = std::string(trim(h));

  std::unordered_map<std::string, std::size_t> header_index;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!header_index.emplace(header[i], i).second) {
      throw Error(ErrorKind::ParseError, "row 1: duplicate column " + header[i]);
    }
  }
  auto target_it = header_index.find(options.target_column);
  if (target_it == header_index.end()) {
    throw Error(ErrorKind::MissingColumn, options.target_column);
  }
  const std::size_t target_pos = target_it->second;
  for (const auto& name : options.required_columns) {
    if (!header_index.contains(name)) throw Error(ErrorKind::MissingColumn, name);
  }
  const std::set<std::string> categorical(options.categorical_columns.begin(),
                                          options.categorical_columns.end());
  for (const auto& name : categorical) {
    if (!header_index.contains(name)) throw Error(ErrorKind::MissingColumn, name);
  }

  Dataset ds;
  std::vector<std::size_t> source_of_feature;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i == target_pos) continue;
    ColumnSchema col;
    col.name = header[i];
    col.kind = categorical.contains(header[i]) ? ColumnKind::categorical : ColumnKind::numeric;
    col.position = ds.schema.size();
    ds.schema.push_back(col);
    source_of_feature.push_back(i);
  }
  const std::size_t width = ds.schema.size();

  std::vector<std::unordered_map<std::string, int>> interned(width);
  std::vector<std::vector<std::string>*> text_slots(width, nullptr);
  for (const auto& col : ds.schema) {
    if (col.kind == ColumnKind::categorical) text_slots[col.position] = &ds.categorical_text[col.name];
  }
  std::unordered_map<std::string, int> label_codes;

  std::vector<double> values;
  std::vector<double> row(width);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_record(line, line_no);
    if (fields.size() != header.size()) {
      throw Error(ErrorKind::ParseError, "row " + std::to_string(line_no) + ": expected " +
                                             std::to_string(header.size()) + " fields, got " +
                                             std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < width; ++j) {
      const std::string& cell = fields[source_of_feature[j]];
      if (trim(cell).empty()) {
        throw Error(ErrorKind::ParseError,
                    "row " + std::to_string(line_no) + ", column " + ds.schema[j].name + ": empty cell");
      }
      if (text_slots[j] != nullptr) {
        std::string text(trim(cell));
        auto [it, inserted] =
            interned[j].emplace(text, static_cast<int>(interned[j].size()));
        row[j] = it->second;
        text_slots[j]->push_back(std::move(text));
      } else {
        auto value = parse_number(cell);
        if (!value) {
          throw Error(ErrorKind::ParseError, "row " + std::to_string(line_no) + ", column " +
                                                 ds.schema[j].name + ": not a number '" + cell + "'");
        }
        row[j] = *value;
      }
    }
    const std::string label = normalize_class_name(fields[target_pos]);
    if (label.empty()) {
      throw Error(ErrorKind::ParseError, "row " + std::to_string(line_no) + ": empty class label");
    }
    auto [it, inserted] = label_codes.emplace(label, static_cast<int>(ds.label_names.size()));
    if (inserted) ds.label_names.push_back(label);
    ds.labels.push_back(it->second);
    values.insert(values.end(), row.begin(), row.end());
  }
  if (ds.labels.empty()) throw Error(ErrorKind::EmptyDataset, "no data rows");
  ds.rows = Matrix(ds.labels.size(), width, std::move(values));
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  return parse_csv(in, options);
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

void write_csv(const Dataset& ds, std::ostream& out, std::string_view target_column) {
  for (const auto& col : ds.schema) out << quote_if_needed(col.name) << ',';
  out << target_column << '\n';
  std::vector<const std::vector<std::string>*> text(ds.width(), nullptr);
  for (const auto& col : ds.schema) {
    auto it = ds.categorical_text.find(col.name);
    if (it != ds.categorical_text.end()) text[col.position] = &it->second;
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.width(); ++j) {
      if (text[j] != nullptr) {
        out << quote_if_needed((*text[j])[i]);
      } else {
        out << format_double(ds.rows(i, j));
      }
      out << ',';
    }
    out << quote_if_needed(ds.label_name(i)) << '\n';
  }
}

void save_csv(const Dataset& ds, const std::filesystem::path& path, std::string_view target_column) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  write_csv(ds, out, target_column);
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

Dataset filter_classes(const Dataset& ds, std::span<const std::string> keep) {
  if (keep.empty()) throw Error(ErrorKind::UnknownClass, "empty class selection");
  std::set<int> keep_codes;
  for (const auto& raw : keep) {
    const std::string name = normalize_class_name(raw);
    auto it = std::find(ds.label_names.begin(), ds.label_names.end(), name);
    const int code = static_cast<int>(it - ds.label_names.begin());
    if (it == ds.label_names.end() ||
        std::find(ds.labels.begin(), ds.labels.end(), code) == ds.labels.end()) {
      throw Error(ErrorKind::UnknownClass, name);
    }
    keep_codes.insert(code);
  }
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (keep_codes.contains(ds.labels[i])) rows.push_back(i);
  }
  Dataset out = ds.subset(rows);
  if (!out.labels_encoded) {
    // Re-intern so raw codes stay dense in first-appearance order.
    std::vector<int> remap(ds.label_names.size(), -1);
    std::vector<std::string> names;
    for (int& code : out.labels) {
      if (remap[code] < 0) {
        remap[code] = static_cast<int>(names.size());
        names.push_back(ds.label_names[code]);
      }
      code = remap[code];
    }
    out.label_names = std::move(names);
  }
  return out;
}

std::pair<Dataset, LabelEncoding> encode_class_labels(const Dataset& ds) {
  if (ds.size() == 0) throw Error(ErrorKind::EmptyDataset, "cannot encode labels of empty dataset");
  std::set<std::string> present;
  for (int code : ds.labels) present.insert(ds.label_names.at(code));

  static const std::vector<std::string> canonical = {"bruteforce", "dos", "legitimate"};
  std::vector<std::string> ordered;
  if (present == std::set<std::string>(canonical.begin(), canonical.end())) {
    ordered = canonical;
  } else {
    ordered.assign(present.begin(), present.end());
  }

  LabelEncoding enc;
  enc.inverse = ordered;
  for (std::size_t i = 0; i < ordered.size(); ++i) enc.mapping[ordered[i]] = static_cast<int>(i);

  Dataset out = ds;
  for (int& code : out.labels) code = enc.mapping.at(ds.label_names.at(code));
  out.label_names = ordered;
  out.labels_encoded = true;
  return {std::move(out), std::move(enc)};
}

}  // namespace mqttids

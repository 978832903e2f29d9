#include "mqttids/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mqttids/error.hpp"
#include "mqttids/parallel.hpp"
#include "mqttids/rng.hpp"

namespace mqttids {

namespace {

std::vector<std::string> column_values_as_text(const Dataset& ds, const std::string& column) {
  auto text = ds.categorical_text.find(column);
  if (text != ds.categorical_text.end()) return text->second;
  const auto idx = ds.column_index(column);
  if (!idx) throw Error(ErrorKind::MissingColumn, column);
  std::vector<std::string> out;
  out.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) out.push_back(format_double(ds.rows(i, *idx)));
  return out;
}

// Row indices per class code, ascending.
std::vector<std::vector<std::size_t>> group_by_class(std::span<const int> labels) {
  int max_code = -1;
  for (int code : labels) {
    if (code < 0) throw Error(ErrorKind::CodeOutOfRange, "negative label code");
    max_code = std::max(max_code, code);
  }
  std::vector<std::vector<std::size_t>> groups(static_cast<std::size_t>(max_code + 1));
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  return groups;
}

}  // namespace

CategoricalEncodingMaps fit_categorical_encoding(const Dataset& ds,
                                                 std::span<const std::string> columns) {
  CategoricalEncodingMaps maps;
  for (const auto& column : columns) {
    if (!ds.column_index(column)) throw Error(ErrorKind::MissingColumn, column);
    const auto values = column_values_as_text(ds, column);
    const std::set<std::string> distinct(values.begin(), values.end());
    auto& map = maps.columns[column];
    int code = 0;
    for (const auto& v : distinct) map.emplace(v, code++);
  }
  return maps;
}

Dataset apply_categorical_encoding(const Dataset& ds, const CategoricalEncodingMaps& maps) {
  Dataset out = ds;
  for (const auto& [column, map] : maps.columns) {
    const auto idx = ds.column_index(column);
    if (!idx) throw Error(ErrorKind::MissingColumn, column);
    const auto values = column_values_as_text(ds, column);
    const int unknown = static_cast<int>(map.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
      auto it = map.find(values[i]);
      out.rows(i, *idx) = it == map.end() ? unknown : it->second;
    }
    out.schema[*idx].kind = ColumnKind::categorical;
    out.categorical_text.erase(column);
  }
  return out;
}

SplitIndices stratified_split(std::span<const int> labels, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw Error(ErrorKind::InvalidSpec, "split ratio must lie in (0, 1)");
  }
  auto groups = group_by_class(labels);
  for (std::size_t c = 0; c < groups.size(); ++c) {
    if (!groups[c].empty() && groups[c].size() < 2) {
      throw Error(ErrorKind::DegenerateClass, "class " + std::to_string(c) + " has a single row");
    }
  }

  const std::size_t n = labels.size();
  const auto target = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  std::vector<std::size_t> quota(groups.size());
  std::vector<double> remainder(groups.size());
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < groups.size(); ++c) {
    const double exact = ratio * static_cast<double>(groups[c].size());
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - static_cast<double>(quota[c]);
    assigned += quota[c];
  }
  std::vector<std::size_t> order(groups.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < target && i < order.size(); ++i) {
    const std::size_t c = order[i];
    if (groups[c].empty() || quota[c] >= groups[c].size()) continue;
    ++quota[c];
    ++assigned;
  }

  SplitIndices split;
  split.ratio = ratio;
  split.seed = seed;
  for (std::size_t c = 0; c < groups.size(); ++c) {
    auto members = groups[c];
    Rng rng(derive_seed(seed, c));
    rng.shuffle(std::span<std::size_t>(members));
    split.train.insert(split.train.end(), members.begin(), members.begin() + quota[c]);
    split.test.insert(split.test.end(), members.begin() + quota[c], members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

SplitIndices stratified_split(const Dataset& ds, double ratio, std::uint64_t seed) {
  return stratified_split(ds.labels, ratio, seed);
}

std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorKind::InvalidSpec, "need at least 2 folds");
  auto groups = group_by_class(labels);
  std::vector<int> fold_of(labels.size(), -1);
  std::size_t offset = 0;
  for (std::size_t c = 0; c < groups.size(); ++c) {
    auto& members = groups[c];
    if (members.empty()) continue;
    if (members.size() < static_cast<std::size_t>(folds)) {
      throw Error(ErrorKind::FoldTooSmall, "class " + std::to_string(c) + " has " +
                                               std::to_string(members.size()) + " rows for " +
                                               std::to_string(folds) + " folds");
    }
    Rng rng(derive_seed(seed, c));
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t p = 0; p < members.size(); ++p) {
      fold_of[members[p]] = static_cast<int>((offset + p) % static_cast<std::size_t>(folds));
    }
    offset += members.size();
  }
  return fold_of;
}

ScalerParams fit_minmax(const Matrix& x, std::vector<std::string> columns) {
  if (x.rows() == 0) throw Error(ErrorKind::EmptyDataset, "cannot fit scaler on empty data");
  if (columns.size() != x.cols()) {
    throw Error(ErrorKind::SchemaMismatch, "column names do not match matrix width");
  }
  ScalerParams params;
  params.columns = std::move(columns);
  params.min.assign(x.cols(), 0.0);
  params.max.assign(x.cols(), 0.0);
  for (std::size_t j = 0; j < x.cols(); ++j) {
    params.min[j] = params.max[j] = x(0, j);
  }
  for (std::size_t i = 1; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      params.min[j] = std::min(params.min[j], x(i, j));
      params.max[j] = std::max(params.max[j], x(i, j));
    }
  }
  return params;
}

Matrix apply_minmax(const ScalerParams& params, const Matrix& x) {
  if (x.cols() != params.min.size()) {
    throw Error(ErrorKind::SchemaMismatch, "scaler width differs from data width");
  }
  Matrix out = x;
  for (std::size_t j = 0; j < x.cols(); ++j) {
    const double lo = params.min[j];
    const double range = params.max[j] - lo;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      out(i, j) = range > 0.0 ? (x(i, j) - lo) / range : 0.0;
    }
  }
  return out;
}

ScalerParams fit_minmax(const Dataset& ds) { return fit_minmax(ds.rows, ds.feature_names()); }

Dataset apply_minmax(const ScalerParams& params, const Dataset& ds) {
  if (ds.feature_names() != params.columns) {
    throw Error(ErrorKind::SchemaMismatch, "scaler was fitted on a different column set");
  }
  Dataset out = ds;
  out.rows = apply_minmax(params, ds.rows);
  out.categorical_text.clear();
  return out;
}

SmoteResult smote_oversample_traced(const Dataset& ds, const SmoteConfig& cfg) {
  if (cfg.k_neighbors < 1) throw Error(ErrorKind::InvalidSpec, "k_neighbors must be >= 1");
  const auto groups = group_by_class(ds.labels);
  std::size_t majority = 0;
  for (std::size_t c = 0; c < groups.size(); ++c) {
    if (groups[c].size() == 1) {
      throw Error(ErrorKind::DegenerateClass, "class " + std::to_string(c) + " has a single row");
    }
    majority = std::max(majority, groups[c].size());
  }

  SmoteResult result;
  result.data = ds;
  result.data.categorical_text.clear();
  const std::size_t d = ds.width();

  for (std::size_t c = 0; c < groups.size(); ++c) {
    const auto& members = groups[c];
    if (members.empty() || members.size() >= majority) continue;
    const std::size_t k = std::min<std::size_t>(cfg.k_neighbors, members.size() - 1);

    // k nearest same-class neighbours for every member; ties go to the lower row.
    std::vector<std::vector<std::size_t>> neighbours(members.size());
    parallel_for(members.size(), [&](std::size_t a) {
      std::vector<std::pair<double, std::size_t>> dist;
      dist.reserve(members.size() - 1);
      const auto xa = ds.rows.row(members[a]);
      for (std::size_t b = 0; b < members.size(); ++b) {
        if (b == a) continue;
        const auto xb = ds.rows.row(members[b]);
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double diff = xa[j] - xb[j];
          s += diff * diff;
        }
        dist.emplace_back(s, members[b]);
      }
      std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
      for (std::size_t i = 0; i < k; ++i) neighbours[a].push_back(dist[i].second);
    });

    const std::size_t needed = majority - members.size();
    std::vector<double> synthetic(d);
    for (std::size_t s = 0; s < needed; ++s) {
      Rng rng(derive_seed(cfg.seed, c, s));
      const std::size_t a = static_cast<std::size_t>(rng.below(members.size()));
      const std::size_t nb = neighbours[a][static_cast<std::size_t>(rng.below(k))];
      const double gap = rng.uniform();
      const auto base = ds.rows.row(members[a]);
      const auto other = ds.rows.row(nb);
      for (std::size_t j = 0; j < d; ++j) {
        const double v = base[j] + gap * (other[j] - base[j]);
        synthetic[j] = std::clamp(v, std::min(base[j], other[j]), std::max(base[j], other[j]));
      }
      result.data.rows.append_row(synthetic);
      result.data.labels.push_back(static_cast<int>(c));
      result.origins.push_back({members[a], nb, gap});
    }
  }
  return result;
}

Dataset smote_oversample(const Dataset& ds, const SmoteConfig& cfg) {
  return smote_oversample_traced(ds, cfg).data;
}

nlohmann::json to_json(const CategoricalEncodingMaps& maps) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [column, map] : maps.columns) doc[column] = map;
  return doc;
}

nlohmann::json to_json(const ScalerParams& params) {
  return {{"columns", params.columns}, {"min", params.min}, {"max", params.max}};
}

nlohmann::json to_json(const SplitIndices& split) {
  return {{"ratio", split.ratio}, {"seed", split.seed}, {"train", split.train}, {"test", split.test}};
}

nlohmann::json to_json(const PreprocessArtifacts& a) {
  return {
      {"label_names", a.label_names},
      {"categorical_encoding", to_json(a.encoding)},
      {"scaler", to_json(a.scaler)},
      {"split", to_json(a.split)},
      {"smote", {{"enabled", a.smote_enabled}, {"k_neighbors", a.smote.k_neighbors}, {"seed", a.smote.seed}}},
      {"feature_names", a.feature_names},
  };
}

PreprocessArtifacts artifacts_from_json(const nlohmann::json& doc) {
  try {
    PreprocessArtifacts a;
    a.label_names = doc.at("label_names").get<std::vector<std::string>>();
    for (const auto& [column, map] : doc.at("categorical_encoding").items()) {
      a.encoding.columns[column] = map.get<std::map<std::string, int>>();
    }
    const auto& scaler = doc.at("scaler");
    a.scaler.columns = scaler.at("columns").get<std::vector<std::string>>();
    a.scaler.min = scaler.at("min").get<std::vector<double>>();
    a.scaler.max = scaler.at("max").get<std::vector<double>>();
    const auto& split = doc.at("split");
    a.split.ratio = split.at("ratio").get<double>();
    a.split.seed = split.at("seed").get<std::uint64_t>();
    a.split.train = split.at("train").get<std::vector<std::size_t>>();
    a.split.test = split.at("test").get<std::vector<std::size_t>>();
    const auto& smote = doc.at("smote");
    a.smote_enabled = smote.at("enabled").get<bool>();
    a.smote.k_neighbors = smote.at("k_neighbors").get<int>();
    a.smote.seed = smote.at("seed").get<std::uint64_t>();
    a.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedDocument, std::string("artifacts: ") + e.what());
  }
}

}  // namespace mqttids

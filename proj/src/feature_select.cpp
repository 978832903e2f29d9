#include "mqttids/feature_select.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "mqttids/error.hpp"

namespace mqttids {

namespace {

void check_names(const Matrix& x, std::span<const std::string> names) {
  if (names.size() != x.cols()) {
    throw Error(ErrorKind::SchemaMismatch, "feature names do not match matrix width");
  }
}

void check_labels(const Matrix& x, std::span<const int> y) {
  if (y.size() != x.rows()) throw Error(ErrorKind::LengthMismatch, "labels do not match rows");
}

RankedFeatures rank_scores(RankMethod method, const std::vector<double>& scores,
                           std::span<const std::string> names, std::size_t k) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  RankedFeatures ranked;
  ranked.method = method;
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i) {
    ranked.entries.push_back({names[order[i]], scores[order[i]], order[i]});
  }
  return ranked;
}

void check_k(std::size_t k, std::size_t d) {
  if (k == 0 || k > d) {
    throw Error(ErrorKind::InvalidSpec, "k must lie in [1, " + std::to_string(d) + "]");
  }
}

}  // namespace

std::string to_string(RankMethod method) {
  switch (method) {
    case RankMethod::kbest: return "kbest";
    case RankMethod::pcc: return "pcc";
    case RankMethod::pca: return "pca";
  }
  return "unknown";
}

std::string to_string(FeatureSetProvenance provenance) {
  switch (provenance) {
    case FeatureSetProvenance::golden: return "golden";
    case FeatureSetProvenance::consensus: return "consensus";
    case FeatureSetProvenance::manual: return "manual";
  }
  return "unknown";
}

std::vector<std::string> RankedFeatures::names() const {
  std::vector<std::string> out;
  for (const auto& e : entries) out.push_back(e.name);
  return out;
}

std::vector<double> anova_f_scores(const Matrix& x, std::span<const int> y) {
  check_labels(x, y);
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < y.size(); ++i) groups[y[i]].push_back(i);
  if (groups.size() < 2) throw Error(ErrorKind::SingleClass, "ANOVA needs at least two classes");

  const double n = static_cast<double>(x.rows());
  const double k = static_cast<double>(groups.size());
  std::vector<double> scores(x.cols(), 0.0);
  for (std::size_t j = 0; j < x.cols(); ++j) {
    double grand = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) grand += x(i, j);
    grand /= n;

    double between = 0.0;
    double within = 0.0;
    bool classes_constant = true;
    std::set<double> class_values;
    for (const auto& [code, rows] : groups) {
      double mean = 0.0;
      double lo = x(rows.front(), j);
      double hi = lo;
      for (std::size_t i : rows) {
        mean += x(i, j);
        lo = std::min(lo, x(i, j));
        hi = std::max(hi, x(i, j));
      }
      mean /= static_cast<double>(rows.size());
      if (lo != hi) classes_constant = false;
      class_values.insert(lo);
      for (std::size_t i : rows) within += (x(i, j) - mean) * (x(i, j) - mean);
      between += static_cast<double>(rows.size()) * (mean - grand) * (mean - grand);
    }

    if (classes_constant) {
      // Exact zero spread inside every class: the ratio is either 0/0 or x/0.
      scores[j] = class_values.size() > 1 ? kInfiniteScore : 0.0;
      continue;
    }
    scores[j] = (between / (k - 1.0)) / (within / (n - k));
  }
  return scores;
}

std::vector<double> pearson_scores(const Matrix& x, std::span<const int> y) {
  check_labels(x, y);
  if (x.rows() < 2) throw Error(ErrorKind::EmptyDataset, "Pearson correlation needs n >= 2");
  const double n = static_cast<double>(x.rows());
  double my = 0.0;
  for (int v : y) my += v;
  my /= n;
  double syy = 0.0;
  for (int v : y) syy += (v - my) * (v - my);
  const bool labels_constant = std::adjacent_find(y.begin(), y.end(), std::not_equal_to<>()) == y.end();

  std::vector<double> scores(x.cols(), 0.0);
  if (labels_constant) return scores;
  for (std::size_t j = 0; j < x.cols(); ++j) {
    double mx = 0.0;
    double lo = x(0, j);
    double hi = lo;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      mx += x(i, j);
      lo = std::min(lo, x(i, j));
      hi = std::max(hi, x(i, j));
    }
    if (lo == hi) continue;
    mx /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double dx = x(i, j) - mx;
      sxy += dx * (y[i] - my);
      sxx += dx * dx;
    }
    scores[j] = std::min(1.0, std::abs(sxy) / std::sqrt(sxx * syy));
  }
  return scores;
}

RankedFeatures kbest_rank(const Matrix& x, std::span<const int> y,
                          std::span<const std::string> names, std::size_t k) {
  check_names(x, names);
  check_k(k, x.cols());
  return rank_scores(RankMethod::kbest, anova_f_scores(x, y), names, k);
}

RankedFeatures pearson_rank(const Matrix& x, std::span<const int> y,
                            std::span<const std::string> names) {
  check_names(x, names);
  return rank_scores(RankMethod::pcc, pearson_scores(x, y), names, x.cols());
}

std::pair<std::vector<double>, Matrix> symmetric_eigen(const Matrix& input) {
  const std::size_t d = input.rows();
  if (input.cols() != d) throw Error(ErrorKind::DimensionMismatch, "matrix is not square");
  Matrix a = input;
  Matrix v(d, d);
  for (std::size_t i = 0; i < d; ++i) v(i, i) = 1.0;

  double scale = 0.0;
  for (double e : a.data()) scale += e * e;
  const double tolerance = 1e-30 * std::max(scale, 1e-300);

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) off += a(p, q) * a(p, q);
    }
    if (off <= tolerance) break;

    for (std::size_t p = 0; p + 1 < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < d; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < d; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < d; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  std::vector<double> values(d);
  Matrix vectors(d, d);
  for (std::size_t r = 0; r < d; ++r) {
    values[r] = a(order[r], order[r]);
    for (std::size_t k = 0; k < d; ++k) vectors(r, k) = v(k, order[r]);
  }
  return {values, vectors};
}

PcaModel pca_fit(const Matrix& x, std::size_t n_components) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (n_components == 0 || n_components > std::min(n, d)) {
    throw Error(ErrorKind::InvalidSpec, "n_components must lie in [1, min(n, d)]");
  }
  PcaModel model;
  model.column_means.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) model.column_means[j] += x(i, j);
  }
  for (double& m : model.column_means) m /= static_cast<double>(n);

  Matrix cov(d, d);
  std::vector<double> centered(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) centered[j] = x(i, j) - model.column_means[j];
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = a; b < d; ++b) cov(a, b) += centered[a] * centered[b];
    }
  }
  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  double total = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      cov(a, b) /= denom;
      cov(b, a) = cov(a, b);
    }
    total += cov(a, a);
  }
  if (total == 0.0) throw Error(ErrorKind::RankDeficient, "data has zero total variance");

  auto [values, vectors] = symmetric_eigen(cov);
  model.components = Matrix(n_components, d);
  for (std::size_t c = 0; c < n_components; ++c) {
    std::size_t largest = 0;
    for (std::size_t k = 1; k < d; ++k) {
      if (std::abs(vectors(c, k)) > std::abs(vectors(c, largest))) largest = k;
    }
    const double sign = vectors(c, largest) < 0.0 ? -1.0 : 1.0;
    for (std::size_t k = 0; k < d; ++k) model.components(c, k) = sign * vectors(c, k);
    const double variance = std::max(values[c], 0.0);
    model.explained_variance.push_back(variance);
    model.explained_variance_ratio.push_back(std::min(1.0, variance / total));
  }
  return model;
}

Matrix pca_transform(const PcaModel& model, const Matrix& x) {
  if (x.cols() != model.column_means.size()) {
    throw Error(ErrorKind::DimensionMismatch, "PCA input width differs from fitted width");
  }
  Matrix out(x.rows(), model.components.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t c = 0; c < model.components.rows(); ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < x.cols(); ++j) {
        s += (x(i, j) - model.column_means[j]) * model.components(c, j);
      }
      out(i, c) = s;
    }
  }
  return out;
}

std::vector<double> pca_importance(const Matrix& x) {
  const PcaModel model = pca_fit(x, std::min(x.rows(), x.cols()));
  std::vector<double> importance(x.cols(), 0.0);
  double cumulative = 0.0;
  for (std::size_t c = 0; c < model.components.rows(); ++c) {
    cumulative += model.explained_variance_ratio[c];
    if (c > 0 && cumulative > 0.95) break;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      importance[j] += model.explained_variance_ratio[c] * std::abs(model.components(c, j));
    }
  }
  return importance;
}

RankedFeatures pca_rank(const Matrix& x, std::span<const std::string> names, std::size_t k) {
  check_names(x, names);
  check_k(k, x.cols());
  return rank_scores(RankMethod::pca, pca_importance(x), names, k);
}

FeatureSet consensus_select(std::span<const RankedFeatures> reports, std::size_t n,
                            std::size_t top_per_method) {
  if (reports.size() < 2) throw Error(ErrorKind::InvalidSpec, "consensus needs at least two rankings");
  if (n == 0 || top_per_method == 0) throw Error(ErrorKind::InvalidSpec, "n and top_per_method must be >= 1");

  struct Tally {
    std::size_t count = 0;
    double rank_sum = 0.0;
  };
  std::map<std::string, Tally> tally;
  for (const auto& report : reports) {
    const std::size_t limit = std::min(top_per_method, report.entries.size());
    for (std::size_t r = 0; r < limit; ++r) {
      auto& t = tally[report.entries[r].name];
      ++t.count;
      t.rank_sum += static_cast<double>(r + 1);
    }
  }
  if (tally.size() < n) {
    throw Error(ErrorKind::InsufficientFeatures, std::to_string(tally.size()) +
                                                     " distinct names for " + std::to_string(n) +
                                                     " requested");
  }
  std::vector<std::pair<std::string, Tally>> ordered(tally.begin(), tally.end());
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    if (a.second.count != b.second.count) return a.second.count > b.second.count;
    const double ma = a.second.rank_sum / static_cast<double>(a.second.count);
    const double mb = b.second.rank_sum / static_cast<double>(b.second.count);
    return ma < mb;
  });
  FeatureSet fs;
  fs.provenance = FeatureSetProvenance::consensus;
  for (std::size_t i = 0; i < n; ++i) fs.names.push_back(ordered[i].first);
  return fs;
}

FeatureSet golden_final_set() {
  return {{"tcp.flags", "tcp.time_delta", "tcp.len", "mqtt.dupflag", "mqtt.hdrflags", "mqtt.len",
           "mqtt.msg", "mqtt.msgid", "mqtt.qos", "mqtt.conack.flags"},
          FeatureSetProvenance::golden};
}

Dataset project(const Dataset& ds, const FeatureSet& fs) {
  if (fs.names.empty()) throw Error(ErrorKind::InvalidSpec, "empty feature set");
  std::vector<std::size_t> columns;
  for (const auto& name : fs.names) {
    const auto idx = ds.column_index(name);
    if (!idx) throw Error(ErrorKind::MissingColumn, name);
    if (std::find(columns.begin(), columns.end(), *idx) != columns.end()) {
      throw Error(ErrorKind::InvalidSpec, "duplicate feature " + name);
    }
    columns.push_back(*idx);
  }
  Dataset out;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    ColumnSchema col = ds.schema[columns[i]];
    col.position = i;
    out.schema.push_back(col);
    auto text = ds.categorical_text.find(col.name);
    if (text != ds.categorical_text.end()) out.categorical_text.insert(*text);
  }
  out.rows = ds.rows.select_columns(columns);
  out.labels = ds.labels;
  out.label_names = ds.label_names;
  out.labels_encoded = ds.labels_encoded;
  return out;
}

nlohmann::json to_json(const RankedFeatures& ranked) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : ranked.entries) {
    nlohmann::json score = std::isinf(e.score) ? nlohmann::json("+inf") : nlohmann::json(e.score);
    entries.push_back({{"name", e.name}, {"score", score}});
  }
  return {{"method", to_string(ranked.method)}, {"entries", entries}};
}

nlohmann::json to_json(const FeatureSet& fs) {
  return {{"names", fs.names}, {"provenance", to_string(fs.provenance)}};
}

nlohmann::json to_json(const SelectionReport& report) {
  nlohmann::json rankings = nlohmann::json::array();
  for (const auto& r : report.rankings) rankings.push_back(to_json(r));
  return {{"rankings", rankings}, {"feature_set", to_json(report.chosen)}};
}

FeatureSet feature_set_from_json(const nlohmann::json& doc) {
  try {
    FeatureSet fs;
    fs.names = doc.at("names").get<std::vector<std::string>>();
    const auto provenance = doc.value("provenance", "manual");
    if (provenance == "golden") {
      fs.provenance = FeatureSetProvenance::golden;
    } else if (provenance == "consensus") {
      fs.provenance = FeatureSetProvenance::consensus;
    } else if (provenance == "manual") {
      fs.provenance = FeatureSetProvenance::manual;
    } else {
      throw Error(ErrorKind::MalformedDocument, "unknown provenance " + provenance);
    }
    return fs;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedDocument, std::string("feature set: ") + e.what());
  }
}

}  // namespace mqttids

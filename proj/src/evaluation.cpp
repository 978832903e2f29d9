#include "mqttids/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <memory>
#include <sstream>

#include "mqttids/error.hpp"
#include "mqttids/preprocess.hpp"
#include "mqttids/rng.hpp"

namespace mqttids {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

std::string attack_label(const ConfusionMatrix& cm, std::size_t c) {
  std::string name = c < cm.label_names.size() ? cm.label_names[c] : "class";
  if (!name.empty()) name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
  return name + ": " + std::to_string(c);
}

}  // namespace

std::size_t ConfusionMatrix::total() const {
  std::size_t sum = 0;
  for (const auto& row : counts) {
    for (std::size_t v : row) sum += v;
  }
  return sum;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t sum = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) sum += counts[c][c];
  return sum;
}

std::size_t ConfusionMatrix::row_sum(std::size_t c) const {
  std::size_t sum = 0;
  for (std::size_t v : counts.at(c)) sum += v;
  return sum;
}

std::size_t ConfusionMatrix::column_sum(std::size_t c) const {
  std::size_t sum = 0;
  for (const auto& row : counts) sum += row.at(c);
  return sum;
}

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, int n_classes,
                          std::vector<std::string> label_names) {
  if (y_true.size() != y_pred.size()) {
    throw Error(ErrorKind::LengthMismatch, "y_true has " + std::to_string(y_true.size()) +
                                               " entries, y_pred " + std::to_string(y_pred.size()));
  }
  if (n_classes < 1) throw Error(ErrorKind::CodeOutOfRange, "n_classes must be positive");
  const auto k = static_cast<std::size_t>(n_classes);
  ConfusionMatrix cm;
  cm.counts.assign(k, std::vector<std::size_t>(k, 0));
  cm.label_names = std::move(label_names);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i];
    const int p = y_pred[i];
    if (t < 0 || t >= n_classes || p < 0 || p >= n_classes) {
      throw Error(ErrorKind::CodeOutOfRange, "class code out of range at row " + std::to_string(i));
    }
    ++cm.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) throw Error(ErrorKind::EmptyMatrix, "accuracy of an empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

ClassMetrics class_metrics(const ConfusionMatrix& cm, int c) {
  if (c < 0 || static_cast<std::size_t>(c) >= cm.n_classes()) {
    throw Error(ErrorKind::CodeOutOfRange, "class " + std::to_string(c) + " not in confusion matrix");
  }
  const auto idx = static_cast<std::size_t>(c);
  const std::size_t tp = cm.counts[idx][idx];
  ClassMetrics m;
  m.support = cm.row_sum(idx);
  m.precision = ratio(tp, cm.column_sum(idx));
  m.recall = ratio(tp, m.support);
  const double denom = m.precision + m.recall;
  m.f1 = denom == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / denom;
  return m;
}

EvalReport make_report(const ConfusionMatrix& cm, double fit_time_s, double predict_time_s) {
  EvalReport report;
  report.confusion = cm;
  report.accuracy = accuracy(cm);
  report.fit_time_s = fit_time_s;
  report.predict_time_s = predict_time_s;
  const double total = static_cast<double>(cm.total());
  const double k = static_cast<double>(cm.n_classes());
  for (std::size_t c = 0; c < cm.n_classes(); ++c) {
    const auto m = class_metrics(cm, static_cast<int>(c));
    report.per_class.push_back(m);
    const double w = static_cast<double>(m.support) / total;
    report.macro.precision += m.precision / k;
    report.macro.recall += m.recall / k;
    report.macro.f1 += m.f1 / k;
    report.weighted.precision += w * m.precision;
    report.weighted.recall += w * m.recall;
    report.weighted.f1 += w * m.f1;
  }
  return report;
}

EvalReport evaluate(const Model& model, const Matrix& x, std::span<const int> y,
                    std::vector<std::string> label_names, double fit_time_s) {
  const auto start = Clock::now();
  const auto pred = predict(model, x);
  const double predict_time = seconds_since(start);
  return make_report(confusion(y, pred, model.n_classes, std::move(label_names)), fit_time_s, predict_time);
}

EvalReport evaluate(const Model& model, const Dataset& test, double fit_time_s) {
  return evaluate(model, test.rows, test.labels, test.label_names, fit_time_s);
}

const std::vector<std::string>& scalar_metric_names() {
  static const std::vector<std::string> names = {
      "accuracy",           "macro_precision",    "macro_recall", "macro_f1",      "weighted_precision",
      "weighted_recall",    "weighted_f1",        "fit_time_s",   "predict_time_s"};
  return names;
}

double scalar_metric(const EvalReport& r, const std::string& name) {
  if (name == "accuracy") return r.accuracy;
  if (name == "macro_precision") return r.macro.precision;
  if (name == "macro_recall") return r.macro.recall;
  if (name == "macro_f1") return r.macro.f1;
  if (name == "weighted_precision") return r.weighted.precision;
  if (name == "weighted_recall") return r.weighted.recall;
  if (name == "weighted_f1") return r.weighted.f1;
  if (name == "fit_time_s") return r.fit_time_s;
  if (name == "predict_time_s") return r.predict_time_s;
  throw Error(ErrorKind::InvalidSpec, "unknown metric '" + name + "'");
}

CvReport cross_validate(const Dataset& ds, const CvOptions& options, const Trainer& trainer) {
  if (options.folds < 2) throw Error(ErrorKind::InvalidSpec, "cross-validation needs at least 2 folds");
  if (!ds.categorical_text.empty()) {
    throw Error(ErrorKind::InvalidSpec, "encode categorical columns before cross-validation");
  }
  const int n_classes = static_cast<int>(ds.n_classes());
  const auto fold_of = stratified_folds(ds.labels, options.folds, options.seed);

  CvReport cv;
  cv.folds = options.folds;
  cv.pooled.counts.assign(ds.n_classes(), std::vector<std::size_t>(ds.n_classes(), 0));
  cv.pooled.label_names = ds.label_names;

  for (int f = 0; f < options.folds; ++f) {
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
    for (std::size_t i = 0; i < ds.size(); ++i) (fold_of[i] == f ? test_rows : train_rows).push_back(i);

    Dataset train = ds.subset(train_rows);
    Dataset test = ds.subset(test_rows);
    if (options.scale) {
      const auto params = fit_minmax(train);
      train = apply_minmax(params, train);
      test = apply_minmax(params, test);
    }
    if (options.smote) {
      train = smote_oversample(train, {options.smote_k, derive_seed(options.seed, 1, static_cast<std::uint64_t>(f))});
    }

    const auto fit_start = Clock::now();
    const Predictor predictor = trainer(train.rows, train.labels, static_cast<std::size_t>(f));
    const double fit_time = seconds_since(fit_start);
    const auto predict_start = Clock::now();
    const auto pred = predictor(test.rows);
    const double predict_time = seconds_since(predict_start);

    auto report = make_report(confusion(test.labels, pred, n_classes, ds.label_names), fit_time, predict_time);
    for (std::size_t t = 0; t < ds.n_classes(); ++t) {
      for (std::size_t p = 0; p < ds.n_classes(); ++p) cv.pooled.counts[t][p] += report.confusion.counts[t][p];
    }
    cv.per_fold.push_back(std::move(report));
    cv.fold_test_rows.push_back(std::move(test_rows));
  }

  const double n = static_cast<double>(cv.per_fold.size());
  for (const auto& name : scalar_metric_names()) {
    MetricSummary s;
    s.min = s.max = scalar_metric(cv.per_fold.front(), name);
    for (const auto& r : cv.per_fold) {
      const double v = scalar_metric(r, name);
      s.mean += v / n;
      s.min = std::min(s.min, v);
      s.max = std::max(s.max, v);
    }
    double var = 0.0;
    for (const auto& r : cv.per_fold) var += std::pow(scalar_metric(r, name) - s.mean, 2) / n;
    s.std = std::sqrt(var);
    // Guard the mean against summation rounding just outside the range.
    s.mean = std::clamp(s.mean, s.min, s.max);
    cv.summary[name] = s;
  }
  return cv;
}

CvReport cross_validate(const MethodConfig& method, const Dataset& ds, const CvOptions& options) {
  const int n_classes = static_cast<int>(ds.n_classes());
  const std::uint64_t seed = options.seed;
  Trainer trainer = [&](const Matrix& x, std::span<const int> y, std::size_t fold) -> Predictor {
    auto model = std::make_shared<Model>(fit_method(method, x, y, derive_seed(seed, 2, fold), n_classes));
    return [model](const Matrix& q) { return predict(*model, q); };
  };
  return cross_validate(ds, options, trainer);
}

json to_json(const ConfusionMatrix& cm) {
  return {{"label_names", cm.label_names}, {"counts", cm.counts}};
}

json to_json(const ClassMetrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
}

json to_json(const EvalReport& report) {
  json per_class = json::array();
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    json entry = to_json(report.per_class[c]);
    entry["class"] = c;
    if (c < report.confusion.label_names.size()) entry["name"] = report.confusion.label_names[c];
    per_class.push_back(std::move(entry));
  }
  return {{"accuracy", report.accuracy},
          {"confusion", to_json(report.confusion)},
          {"per_class", per_class},
          {"macro", {{"precision", report.macro.precision}, {"recall", report.macro.recall}, {"f1", report.macro.f1}}},
          {"weighted",
           {{"precision", report.weighted.precision},
            {"recall", report.weighted.recall},
            {"f1", report.weighted.f1}}},
          {"fit_time_s", report.fit_time_s},
          {"predict_time_s", report.predict_time_s}};
}

json to_json(const CvReport& report) {
  json folds = json::array();
  for (const auto& r : report.per_fold) folds.push_back(to_json(r));
  json summary = json::object();
  for (const auto& [name, s] : report.summary) {
    summary[name] = {{"mean", s.mean}, {"std", s.std}, {"min", s.min}, {"max", s.max}};
  }
  return {{"folds", report.folds},
          {"summary", summary},
          {"pooled_confusion", to_json(report.pooled)},
          {"per_fold", folds},
          {"fold_test_rows", report.fold_test_rows}};
}

std::string render_markdown(std::span<const ReportRow> rows) {
  std::ostringstream out;
  out << "| Methods | Attack | Precision | Recall | F1-Score | Accuracy | Training time | Test time |\n";
  out << "|---|---|---|---|---|---|---|---|\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
      const auto& m = r.per_class[c];
      out << "| " << (c == 0 ? row.method : "") << " | " << attack_label(r.confusion, c) << " | "
          << fixed(m.precision, 2) << " | " << fixed(m.recall, 2) << " | " << fixed(m.f1, 2) << " | ";
      if (c == 0) {
        out << fixed(row.accuracy.value_or(r.accuracy), 4) << " | " << fixed(r.fit_time_s, 4) << " | "
            << fixed(r.predict_time_s, 4) << " |\n";
      } else {
        out << " |  |  |\n";
      }
    }
  }
  return out.str();
}

}  // namespace mqttids

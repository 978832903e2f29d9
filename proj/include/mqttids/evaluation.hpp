#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mqttids/data_ingest.hpp"
#include "mqttids/ensembles.hpp"

namespace mqttids {

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::vector<std::vector<std::size_t>> counts;
  std::vector<std::string> label_names;

  std::size_t n_classes() const noexcept { return counts.size(); }
  std::size_t total() const;
  std::size_t trace() const;
  std::size_t row_sum(std::size_t c) const;
  std::size_t column_sum(std::size_t c) const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, int n_classes,
                          std::vector<std::string> label_names = {});
/// trace / total; throws EmptyMatrix when nothing was counted.
double accuracy(const ConfusionMatrix& cm);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

/// One-vs-rest metrics for class c. Zero denominators yield 0.
ClassMetrics class_metrics(const ConfusionMatrix& cm, int c);

struct AveragedMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  ConfusionMatrix confusion;
  std::vector<ClassMetrics> per_class;
  double accuracy = 0.0;
  AveragedMetrics macro;
  AveragedMetrics weighted;
  double fit_time_s = 0.0;
  double predict_time_s = 0.0;
};

EvalReport make_report(const ConfusionMatrix& cm, double fit_time_s = 0.0, double predict_time_s = 0.0);

/// Predicts x with the model, timing the call, and scores against y.
EvalReport evaluate(const Model& model, const Matrix& x, std::span<const int> y,
                    std::vector<std::string> label_names = {}, double fit_time_s = 0.0);
EvalReport evaluate(const Model& model, const Dataset& test, double fit_time_s = 0.0);

/// Names of the scalar fields summarized across folds.
const std::vector<std::string>& scalar_metric_names();
double scalar_metric(const EvalReport& report, const std::string& name);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation over folds
  double min = 0.0;
  double max = 0.0;
};

struct CvReport {
  int folds = 0;
  std::vector<EvalReport> per_fold;
  std::map<std::string, MetricSummary> summary;
  /// Sum of the per-fold confusion matrices.
  ConfusionMatrix pooled;
  std::vector<std::vector<std::size_t>> fold_test_rows;
};

struct CvOptions {
  int folds = 5;
  std::uint64_t seed = 0;
  bool scale = true;
  bool smote = true;
  int smote_k = 5;
};

using Predictor = std::function<std::vector<int>(const Matrix&)>;
/// Trains on one fold's prepared training matrix and returns its predictor.
using Trainer = std::function<Predictor(const Matrix& x, std::span<const int> y, std::size_t fold)>;

/// Stratified k-fold CV. Scaling and SMOTE are fit on each fold's training
/// part only. The dataset must be fully numeric (categoricals encoded).
CvReport cross_validate(const Dataset& ds, const CvOptions& options, const Trainer& trainer);
/// Same, training one of the seven methods per fold.
CvReport cross_validate(const MethodConfig& method, const Dataset& ds, const CvOptions& options);

nlohmann::json to_json(const ConfusionMatrix& cm);
nlohmann::json to_json(const ClassMetrics& m);
nlohmann::json to_json(const EvalReport& report);
nlohmann::json to_json(const CvReport& report);

/// One table row group per method in report layout: Methods, Attack,
/// Precision, Recall, F1-Score, Accuracy, Training time, Test time.
struct ReportRow {
  std::string method;
  EvalReport report;
  /// Shown instead of report.accuracy when set (mean CV accuracy).
  std::optional<double> accuracy;
};
std::string render_markdown(std::span<const ReportRow> rows);

}  // namespace mqttids

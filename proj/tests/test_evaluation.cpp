#include <doctest.h>

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "mqttids/error.hpp"
#include "mqttids/evaluation.hpp"

using namespace mqttids;

namespace {

ErrorKind kind_of(const std::function<void()>& body) {
  try {
    body();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::IoError;
}

ConfusionMatrix diagonal(std::vector<std::size_t> d) {
  ConfusionMatrix cm;
  cm.counts.assign(d.size(), std::vector<std::size_t>(d.size(), 0));
  for (std::size_t i = 0; i < d.size(); ++i) cm.counts[i][i] = d[i];
  return cm;
}

}  // namespace

TEST_CASE("confusion tallies true rows against predicted columns") {
  const std::vector<int> same{0, 1, 2};
  const auto id = confusion(same, same, 3);
  CHECK(id.counts == std::vector<std::vector<std::size_t>>{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});

  const std::vector<int> t{0, 0, 1};
  const std::vector<int> p{0, 1, 1};
  const auto cm = confusion(t, p, 2);
  CHECK(cm.counts[0][0] == 1);
  CHECK(cm.counts[0][1] == 1);
  CHECK(cm.counts[1][1] == 1);
  CHECK(cm.counts[1][0] == 0);

  const auto empty = confusion(std::vector<int>{}, std::vector<int>{}, 3);
  CHECK(empty.total() == 0);
  CHECK(kind_of([&] { accuracy(empty); }) == ErrorKind::EmptyMatrix);

  CHECK(kind_of([&] { confusion(t, std::vector<int>{0, 1}, 3); }) == ErrorKind::LengthMismatch);
  const std::vector<int> bad{0, 3, 1};
  CHECK(kind_of([&] { confusion(t, bad, 3); }) == ErrorKind::CodeOutOfRange);
  CHECK(kind_of([&] { class_metrics(cm, 2); }) == ErrorKind::CodeOutOfRange);
}

TEST_CASE("accuracy is trace over total") {
  CHECK(accuracy(diagonal({5, 5, 5})) == 1.0);
  ConfusionMatrix scaled = diagonal({9538, 0});
  scaled.counts[1][0] = 462;
  CHECK(accuracy(scaled) == doctest::Approx(0.9538).epsilon(1e-15));
  ConfusionMatrix wrong;
  wrong.counts = {{0, 3}, {4, 0}};
  CHECK(accuracy(wrong) == 0.0);
}

TEST_CASE("per-class metrics and zero guards") {
  ConfusionMatrix cm;
  cm.counts = {{8, 1, 0}, {2, 5, 0}, {0, 0, 0}};
  const auto m0 = class_metrics(cm, 0);
  CHECK(m0.precision == doctest::Approx(0.8));
  CHECK(m0.recall == doctest::Approx(8.0 / 9.0));
  CHECK(m0.support == 9);
  const auto absent = class_metrics(cm, 2);
  CHECK(absent.precision == 0.0);
  CHECK(absent.recall == 0.0);
  CHECK(absent.f1 == 0.0);
  CHECK(absent.support == 0);

  ConfusionMatrix sym;
  sym.counts = {{3, 1}, {1, 3}};
  const auto s = class_metrics(sym, 0);
  CHECK(s.precision == s.recall);
  CHECK(s.f1 == doctest::Approx(s.precision).epsilon(1e-15));
}

TEST_CASE("metrics equal a naive recount over 1000 random pairs") {
  std::mt19937 gen(2024);
  std::uniform_int_distribution<int> cls(0, 2);
  std::uniform_int_distribution<int> len(1, 60);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = len(gen);
    std::vector<int> t(n);
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) {
      t[i] = cls(gen);
      p[i] = cls(gen);
    }
    const auto report = make_report(confusion(t, p, 3));
    int correct = 0;
    for (int i = 0; i < n; ++i) correct += t[i] == p[i];
    CHECK(report.accuracy == static_cast<double>(correct) / n);
    for (int c = 0; c < 3; ++c) {
      int tp = 0, fp = 0, fn = 0;
      for (int i = 0; i < n; ++i) {
        tp += t[i] == c && p[i] == c;
        fp += t[i] != c && p[i] == c;
        fn += t[i] == c && p[i] != c;
      }
      const double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
      const double recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
      const double f1 = precision + recall == 0.0 ? 0.0 : 2 * precision * recall / (precision + recall);
      const auto& m = report.per_class[c];
      CHECK(m.precision == precision);
      CHECK(m.recall == recall);
      CHECK(std::abs(m.f1 - f1) <= 1e-12);
      if (precision > 0 && recall > 0) {
        CHECK(m.f1 >= std::min(precision, recall) - 1e-12);
        CHECK(m.f1 <= std::max(precision, recall) + 1e-12);
      }
    }
    // Micro-averaged precision equals accuracy for single-label data.
    std::size_t tp_sum = 0, pred_sum = 0, support_sum = 0;
    for (std::size_t c = 0; c < 3; ++c) {
      tp_sum += report.confusion.counts[c][c];
      pred_sum += report.confusion.column_sum(c);
      support_sum += report.per_class[c].support;
    }
    CHECK(static_cast<double>(tp_sum) / static_cast<double>(pred_sum) == doctest::Approx(report.accuracy));
    CHECK(support_sum == static_cast<std::size_t>(n));
  }
}

TEST_CASE("macro and weighted averages") {
  ConfusionMatrix cm;
  cm.counts = {{8, 2}, {1, 1}};
  const auto r = make_report(cm, 1.5, 0.25);
  const auto a = class_metrics(cm, 0);
  const auto b = class_metrics(cm, 1);
  CHECK(r.macro.f1 == doctest::Approx((a.f1 + b.f1) / 2));
  CHECK(r.weighted.recall == doctest::Approx((10 * a.recall + 2 * b.recall) / 12));
  CHECK(r.weighted.recall == doctest::Approx(r.accuracy));
  CHECK(r.fit_time_s == 1.5);
  CHECK(r.predict_time_s == 0.25);
}

TEST_CASE("evaluating a perfect model") {
  const auto b = fixtures::blobs({30, 30, 30}, 2, 10.0, 3);
  MethodConfig cfg;
  cfg.method = Method::decision_tree;
  const Model model = fit_method(cfg, b.x, b.y, 1);
  const auto report = evaluate(model, b.x, b.y, {"bruteforce", "dos", "legitimate"});
  CHECK(report.accuracy == 1.0);
  for (const auto& m : report.per_class) CHECK(m.f1 == 1.0);
  CHECK(report.predict_time_s >= 0.0);
  CHECK(kind_of([&] { evaluate(model, Matrix(3, 5), std::vector<int>{0, 1, 2}); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("cross-validation partitions and fold-local fitting") {
  const auto b = fixtures::blobs({500, 300, 200}, 3, 2.0, 4);
  const Dataset ds = fixtures::numeric_dataset(b.x, b.y, {"a", "b", "c"});
  const Trainer constant = [](const Matrix&, std::span<const int>, std::size_t) -> Predictor {
    return [](const Matrix& q) { return std::vector<int>(q.rows(), 0); };
  };
  const CvReport cv = cross_validate(ds, CvOptions{5, 9, true, true, 5}, constant);
  CHECK(cv.folds == 5);
  REQUIRE(cv.per_fold.size() == 5);
  std::vector<std::size_t> all;
  for (const auto& rows : cv.fold_test_rows) {
    CHECK(std::labs(static_cast<long>(rows.size()) - 200) <= 2);
    all.insert(all.end(), rows.begin(), rows.end());
  }
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expected(1000);
  std::iota(expected.begin(), expected.end(), 0);
  CHECK(all == expected);

  for (std::size_t f = 0; f < 5; ++f) {
    std::size_t zeros = 0;
    for (auto r : cv.fold_test_rows[f]) zeros += ds.labels[r] == 0;
    CHECK(cv.per_fold[f].accuracy == static_cast<double>(zeros) / cv.fold_test_rows[f].size());
  }
  for (const auto& [name, s] : cv.summary) {
    CHECK(s.mean >= s.min);
    CHECK(s.mean <= s.max);
  }
  CHECK(cv.pooled.total() == 1000);

  // The trainer sees SMOTE-balanced, train-scaled data.
  const Trainer inspect = [](const Matrix& x, std::span<const int> y, std::size_t) -> Predictor {
    std::map<int, std::size_t> h;
    for (int c : y) ++h[c];
    CHECK(h.at(0) == h.at(1));
    CHECK(h.at(1) == h.at(2));
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const auto col = x.column(j);
      CHECK(*std::min_element(col.begin(), col.end()) == 0.0);
      CHECK(*std::max_element(col.begin(), col.end()) == 1.0);
    }
    return [](const Matrix& q) { return std::vector<int>(q.rows(), 0); };
  };
  cross_validate(ds, CvOptions{5, 9, true, true, 5}, inspect);

  const auto small = fixtures::blobs({30, 3}, 2, 3.0, 1);
  const Dataset tiny = fixtures::numeric_dataset(small.x, small.y, {"a", "b"});
  CHECK(kind_of([&] { cross_validate(tiny, CvOptions{5, 1}, constant); }) == ErrorKind::FoldTooSmall);
  CHECK(kind_of([&] { cross_validate(ds, CvOptions{1, 1}, constant); }) == ErrorKind::InvalidSpec);
}

TEST_CASE("cross-validating a method is deterministic apart from timing") {
  const auto b = fixtures::blobs({60, 60, 60}, 3, 1.5, 6);
  const Dataset ds = fixtures::numeric_dataset(b.x, b.y, {"a", "b", "c"});
  MethodConfig cfg;
  cfg.method = Method::random_forest;
  cfg.base[ClassifierKind::random_forest] = {{"n_trees", 10}};
  const auto first = cross_validate(cfg, ds, CvOptions{5, 3});
  const auto second = cross_validate(cfg, ds, CvOptions{5, 3});
  for (std::size_t f = 0; f < 5; ++f) {
    CHECK(first.per_fold[f].confusion == second.per_fold[f].confusion);
    CHECK(first.per_fold[f].accuracy == second.per_fold[f].accuracy);
  }
  CHECK(first.summary.at("accuracy").mean == second.summary.at("accuracy").mean);
}

TEST_CASE("report serialization and table rendering") {
  ConfusionMatrix cm;
  cm.counts = {{9, 1, 0}, {0, 10, 0}, {1, 0, 9}};
  cm.label_names = {"bruteforce", "dos", "legitimate"};
  const auto report = make_report(cm, 12.34567, 0.5);
  const auto doc = to_json(report);
  CHECK(doc["accuracy"].get<double>() == doctest::Approx(28.0 / 30.0));
  CHECK(doc["per_class"][1]["name"] == "dos");
  CHECK(doc["confusion"]["counts"][0][1] == 1);

  const std::vector<ReportRow> rows{{"Stacking", report, std::nullopt}};
  const std::string md = render_markdown(rows);
  CHECK(md.find("| Methods | Attack | Precision | Recall | F1-Score | Accuracy | Training time | Test time |") == 0);
  CHECK(md.find("| Stacking | Bruteforce: 0 | 0.90 | 0.90 | 0.90 | 0.9333 | 12.3457 | 0.5000 |") !=
        std::string::npos);
  CHECK(md.find("|  | Dos: 1 |") != std::string::npos);
  CHECK(md.find("|  | Legitimate: 2 |") != std::string::npos);
}

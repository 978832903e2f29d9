// Acceptance runner: one PASS/FAIL/SKIP line per criterion, non-zero exit if
// any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "mqttids/pipeline.hpp"
#include "mqttids/rng.hpp"

#ifndef MQTTIDS_SOURCE_DIR
#define MQTTIDS_SOURCE_DIR "."
#endif

namespace {

using namespace mqttids;
namespace fs = std::filesystem;
using nlohmann::json;

struct Outcome {
  enum class Status { pass, fail, skip } status = Status::pass;
  std::string detail;
};

Outcome pass(std::string detail = {}) { return {Outcome::Status::pass, std::move(detail)}; }
Outcome fail(std::string detail) { return {Outcome::Status::fail, std::move(detail)}; }
Outcome skip(std::string detail) { return {Outcome::Status::skip, std::move(detail)}; }

struct Criterion {
  std::string name;
  double limit_s;
  std::function<Outcome()> run;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mqttids_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

json without_timing(json doc) {
  if (doc.is_object()) {
    json out = json::object();
    for (auto& [key, value] : doc.items()) {
      if (!key.ends_with("_time_s")) out[key] = without_timing(value);
    }
    return out;
  }
  if (doc.is_array()) {
    for (auto& v : doc) v = without_timing(v);
  }
  return doc;
}

// Drops the two trailing timing cells of every table row.
std::string markdown_without_timing(const std::string& md) {
  std::istringstream in(md);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.starts_with("|")) {
      for (int cut = 0; cut < 3; ++cut) line.erase(line.find_last_of('|'));
    }
    out << line << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------

Outcome metric_oracle() {
  std::mt19937 gen(7);
  std::uniform_int_distribution<int> cls(0, 2);
  std::uniform_int_distribution<int> len(1, 200);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = len(gen);
    std::vector<int> t(n), p(n);
    for (int i = 0; i < n; ++i) {
      t[i] = cls(gen);
      p[i] = cls(gen);
    }
    const auto report = make_report(confusion(t, p, 3));
    int correct = 0;
    for (int i = 0; i < n; ++i) correct += t[i] == p[i];
    if (report.accuracy != static_cast<double>(correct) / n) return fail("accuracy differs at trial " + std::to_string(trial));
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
      if (m.precision != precision || m.recall != recall) return fail("precision/recall differ at trial " + std::to_string(trial));
      worst = std::max(worst, std::abs(m.f1 - f1));
    }
  }
  if (worst > 1e-12) return fail("f1 deviation " + std::to_string(worst));
  return pass("1000 pairs, precision/recall/accuracy exact, max f1 deviation " + std::to_string(worst));
}

Outcome smote_invariants() {
  std::mt19937 gen(11);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset ds;
  for (std::size_t j = 0; j < 4; ++j) ds.schema.push_back({"f" + std::to_string(j), ColumnKind::numeric, j});
  ds.label_names = {"bruteforce", "dos", "legitimate"};
  ds.labels_encoded = true;
  const std::size_t counts[] = {600, 300, 100};
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < counts[c]; ++i) {
      std::vector<double> row(4);
      for (auto& v : row) v = 2.0 * c + noise(gen);
      ds.rows.append_row(row);
      ds.labels.push_back(c);
    }
  }
  const auto out = smote_oversample_traced(ds, {5, 42});
  std::map<int, std::size_t> h;
  for (int c : out.data.labels) ++h[c];
  if (h[0] != 600 || h[1] != 600 || h[2] != 600) return fail("class counts not 600/600/600");
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (out.data.labels[i] != ds.labels[i]) return fail("original label changed");
    for (std::size_t j = 0; j < 4; ++j) {
      if (out.data.rows(i, j) != ds.rows(i, j)) return fail("original row changed");
    }
  }
  for (std::size_t s = 0; s < out.origins.size(); ++s) {
    const auto& o = out.origins[s];
    const std::size_t r = ds.size() + s;
    if (ds.labels[o.base] != out.data.labels[r] || ds.labels[o.neighbor] != out.data.labels[r]) {
      return fail("synthetic parent from another class");
    }
    for (std::size_t j = 0; j < 4; ++j) {
      const double lo = std::min(ds.rows(o.base, j), ds.rows(o.neighbor, j));
      const double hi = std::max(ds.rows(o.base, j), ds.rows(o.neighbor, j));
      if (out.data.rows(r, j) < lo || out.data.rows(r, j) > hi) return fail("synthetic row outside parent box");
    }
  }
  return pass("600/600/600, " + std::to_string(out.origins.size()) + " synthetic rows inside parent boxes");
}

Outcome pca_checks() {
  Matrix line(50, 2);
  for (std::size_t i = 0; i < 50; ++i) line(i, 0) = line(i, 1) = 0.1 * static_cast<double>(i);
  const auto m = pca_fit(line, 1);
  const double r = 1.0 / std::sqrt(2.0);
  if (std::abs(std::abs(m.components(0, 0)) - r) > 1e-9 || std::abs(std::abs(m.components(0, 1)) - r) > 1e-9) {
    return fail("first component not (1/sqrt2, 1/sqrt2)");
  }
  if (m.explained_variance_ratio[0] < 0.999) return fail("explained ratio below 0.999");

  std::mt19937 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix x(300, 10);
  for (double& v : x.data()) v = u(gen);
  const auto p = pca_fit(x, 10);
  double worst = 0.0;
  for (std::size_t a = 0; a < 10; ++a) {
    for (std::size_t b = 0; b < 10; ++b) {
      double dot = 0.0;
      for (std::size_t j = 0; j < 10; ++j) dot += p.components(a, j) * p.components(b, j);
      worst = std::max(worst, std::abs(dot - (a == b ? 1.0 : 0.0)));
    }
  }
  if (worst > 1e-8) return fail("orthonormality error " + std::to_string(worst));
  return pass("line ratio " + fmt(m.explained_variance_ratio[0], 6) + ", 10-D orthonormality error " +
              std::to_string(worst));
}

Outcome selection_sanity() {
  std::mt19937 gen(3);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> cls(0, 2);
  const std::size_t n = 900;
  const std::size_t star = 6;
  Matrix x(n, 12);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = cls(gen);
    for (std::size_t j = 0; j < 12; ++j) x(i, j) = u(gen);
    x(i, star) = y[i] + noise(gen);
  }
  std::vector<std::string> names;
  for (std::size_t j = 0; j < 12; ++j) names.push_back("f" + std::to_string(j));
  const std::string want = names[star];
  const std::string kb = kbest_rank(x, y, names, 12).entries.front().name;
  const std::string pc = pearson_rank(x, y, names).entries.front().name;
  const std::string pa = pca_rank(x, names, 12).entries.front().name;
  if (kb != want || pc != want || pa != want) return fail("top features: " + kb + ", " + pc + ", " + pa);
  const std::vector<std::string> golden{"tcp.flags", "tcp.time_delta", "tcp.len", "mqtt.dupflag", "mqtt.hdrflags",
                                        "mqtt.len",  "mqtt.msg",       "mqtt.msgid", "mqtt.qos", "mqtt.conack.flags"};
  if (golden_final_set().names != golden) return fail("golden set differs");
  return pass("K-Best, PCC and PCA all rank the label-driven feature first; golden set matches");
}

Outcome classifier_correctness() {
  std::mt19937 gen(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> cls(0, 2);
  Matrix x(600, 6);
  std::vector<int> y(600);
  for (double& v : x.data()) v = u(gen);
  for (int& c : y) c = cls(gen);
  auto train_acc = [&](const FittedClassifier& m) {
    const auto pred = predict(m, x);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < y.size(); ++i) hits += pred[i] == y[i];
    return static_cast<double>(hits) / static_cast<double>(y.size());
  };
  const auto dt = fit({ClassifierKind::decision_tree, {}, 42}, x, y);
  if (train_acc(dt) != 1.0) return fail("DT training accuracy " + fmt(train_acc(dt)));

  const auto rf = fit({ClassifierKind::random_forest, {{"n_trees", 1}, {"bootstrap", 0}, {"max_features", 6}}, 42}, x, y);
  Matrix q(1000, 6);
  for (double& v : q.data()) v = u(gen);
  if (predict(rf, q) != predict(dt, q)) return fail("single-tree forest differs from DT");

  Matrix gx(600, 4);
  for (std::size_t i = 0; i < 600; ++i) {
    for (std::size_t j = 0; j < 4; ++j) gx(i, j) = 0.6 * y[i] + u(gen);
  }
  const auto gbt = fit({ClassifierKind::gbt, {{"n_rounds", 100}}, 42}, gx, y);
  const auto& loss = std::get<GbtModel>(gbt.model).training_loss;
  if (loss.size() != 100) return fail("GBT recorded " + std::to_string(loss.size()) + " rounds");
  for (std::size_t r = 1; r < loss.size(); ++r) {
    if (loss[r] > loss[r - 1]) return fail("GBT loss rose at round " + std::to_string(r));
  }
  const auto knn = fit({ClassifierKind::knn, {{"k", 1}}, 42}, x, y);
  if (train_acc(knn) != 1.0) return fail("KNN k=1 training accuracy " + fmt(train_acc(knn)));
  return pass("DT 1.0, RF(1 tree) == DT on 1000 rows, GBT loss " + fmt(loss.front()) + " -> " + fmt(loss.back()) +
              " nonincreasing, KNN(k=1) 1.0");
}

Outcome ensemble_contracts() {
  std::mt19937 gen(23);
  std::normal_distribution<double> noise(0.0, 1.0);
  Matrix x(300, 3);
  std::vector<int> y(300);
  for (std::size_t i = 0; i < 300; ++i) {
    y[i] = static_cast<int>(i % 3);
    for (std::size_t j = 0; j < 3; ++j) x(i, j) = 0.7 * y[i] + noise(gen);
  }
  const std::vector<ClassifierSpec> specs{{ClassifierKind::random_forest, {{"n_trees", 20}}, 1},
                                          {ClassifierKind::decision_tree, {{"max_depth", 4}}, 2},
                                          {ClassifierKind::knn, {}, 3},
                                          {ClassifierKind::gbt, {{"n_rounds", 20}}, 4}};
  const auto voting = fit_voting(x, y, specs);
  Matrix q(500, 3);
  for (double& v : q.data()) v = 0.7 + 1.2 * noise(gen);
  const auto out = predict_voting(voting, q);
  std::vector<std::vector<int>> votes;
  for (const auto& m : voting.members) votes.push_back(predict(m, q));
  std::size_t majorities = 0;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    int count[3] = {0, 0, 0};
    for (const auto& v : votes) ++count[v[i]];
    for (int c = 0; c < 3; ++c) {
      if (count[c] >= 3) {
        ++majorities;
        if (out[i] != c) return fail("strict majority ignored at row " + std::to_string(i));
      }
    }
  }
  // Constructed 2-2 ties: members that always predict a fixed class.
  auto constant = [&](int code) {
    Matrix cx(2, 3, 0.0);
    const std::vector<int> cy{code, code};
    return fit({ClassifierKind::decision_tree, {}, 0}, cx, cy, 3);
  };
  const std::pair<int, int> ties[] = {{0, 1}, {1, 2}, {2, 0}, {2, 1}};
  for (const auto& [a, b] : ties) {
    VotingModel tie{{constant(a), constant(b), constant(b), constant(a)}, 3};
    if (predict_voting(tie, q)[0] != std::min(a, b)) return fail("2-2 tie not broken to the lowest code");
  }

  const auto oof = build_oof_meta_features(x, y, specs, 5, 9, 3);
  if (oof.features.rows() != x.rows() || oof.features.cols() != 12) return fail("meta-feature shape");
  if (std::any_of(oof.times_predicted.begin(), oof.times_predicted.end(), [](int t) { return t != 1; })) {
    return fail("a row was not predicted exactly once");
  }

  const ClassifierSpec base{ClassifierKind::random_forest, {{"n_trees", 20}}, 5};
  const auto bag = fit_bagging(x, y, base, 1, 77, BaggingOptions{true, true});
  if (predict_bagging(bag, q) != predict(fit(base, x, y), q)) return fail("identity bag differs from base");
  return pass(std::to_string(majorities) + " strict majorities honoured, 4 tie patterns, OOF coverage exact, "
                                           "identity bag == base");
}

RunConfig end_to_end_config(const fs::path& dir) {
  RunConfig c;
  c.synth.rows_per_class = {{"legitimate", 1000}, {"dos", 1000}, {"bruteforce", 1000}};
  c.synth.separation = 4.0;
  c.synth.seed = 42;
  c.dataset = dir / "synth.csv";
  c.output_dir = dir / "run";
  c.categorical_columns = {};
  c.selection.mode = SelectionMode::golden;
  c.smote = true;
  c.cv_folds = 5;
  c.seed = 42;
  return c;
}

Outcome end_to_end() {
  const fs::path dir = scratch("e2e");
  const RunConfig c = end_to_end_config(dir);
  cmd_synth(c.synth, c.dataset);
  if (!cmd_compare(c)) return fail("every method failed");
  const json doc = read_json(c.output_dir / "compare.json");
  std::map<std::string, double> acc;
  for (const auto& m : doc["methods"]) {
    if (m["status"] != "ok") return fail(m["method"].get<std::string>() + ": " + m["error"].get<std::string>());
    acc[m["method"]] = m["accuracy"].get<double>();
  }
  std::ostringstream detail;
  for (Method m : all_methods()) detail << display_name(m) << "=" << fmt(acc[to_string(m)]) << " ";

  const double best_base = std::max({acc["random_forest"], acc["decision_tree"], acc["knn"], acc["gbt"]});
  for (const auto& [name, a] : acc) {
    if (a < 0.95) return fail(name + " below 0.95: " + detail.str());
  }
  for (const char* e : {"stacking", "voting", "bagging"}) {
    if (acc[e] < best_base - 0.02) return fail(std::string(e) + " trails the best base model: " + detail.str());
  }

  // Pinned baseline from the first measured run.
  const fs::path baseline_path = fs::path(MQTTIDS_SOURCE_DIR) / "tests" / "acceptance_baseline.json";
  if (fs::exists(baseline_path)) {
    const json baseline = read_json(baseline_path)["end_to_end_cv_accuracy"];
    for (const auto& [name, a] : acc) {
      if (!baseline.contains(name)) return fail("baseline lacks " + name);
      const double pinned = baseline[name].get<double>();
      if (std::abs(a - pinned) > 0.01) {
        return fail(name + " drifted from pinned " + fmt(pinned) + " to " + fmt(a));
      }
    }
    detail << "(matches pinned baseline)";
  } else {
    detail << "(no pinned baseline found)";
  }
  fs::remove_all(dir);
  return pass(detail.str());
}

Outcome determinism() {
  const fs::path dir = scratch("determinism");
  RunConfig first = end_to_end_config(dir);
  cmd_synth(first.synth, first.dataset);
  RunConfig second = first;
  first.output_dir = dir / "a";
  second.output_dir = dir / "b";
  cmd_compare(first);
  cmd_compare(second);
  for (const char* name : {"train.csv", "test.csv", "artifacts.json", "selection.json"}) {
    if (slurp(first.output_dir / name) != slurp(second.output_dir / name)) return fail(std::string(name) + " differs");
  }
  const auto a = without_timing(read_json(first.output_dir / "compare.json")).dump();
  const auto b = without_timing(read_json(second.output_dir / "compare.json")).dump();
  if (a != b) return fail("compare.json differs outside timing fields");
  const auto ma = markdown_without_timing(slurp(first.output_dir / "compare.md"));
  const auto mb = markdown_without_timing(slurp(second.output_dir / "compare.md"));
  if (ma != mb) return fail("compare.md differs outside timing columns");
  fs::remove_all(dir);
  return pass("compare.json, compare.md, artifacts, selection and prepared CSVs identical");
}

Outcome mqttset_reference() {
  fs::path csv = fs::path(MQTTIDS_SOURCE_DIR) / "data" / "mqttset_reduced.csv";
  if (const char* env = std::getenv("MQTTIDS_MQTTSET_CSV")) csv = env;
  if (!fs::exists(csv)) return skip("reduced MQTTset CSV not found at " + csv.string());
  RunConfig c = load_run_config(fs::path(MQTTIDS_SOURCE_DIR) / "configs" / "mqttset.json");
  c.dataset = csv;
  c.output_dir = scratch("mqttset");
  c.cv_folds = 0;
  cmd_compare(c);
  const json doc = read_json(c.output_dir / "compare.json");
  // Reference accuracies of the published experiment (80/20 split).
  const std::map<std::string, double> reference{{"random_forest", 0.9519}, {"decision_tree", 0.9520},
                                                {"knn", 0.9500},           {"gbt", 0.9518},
                                                {"stacking", 0.9538},      {"voting", 0.9538},
                                                {"bagging", 0.9537}};
  std::ostringstream detail;
  bool ok = true;
  for (const auto& m : doc["methods"]) {
    const std::string name = m["method"];
    if (m["status"] != "ok") {
      ok = false;
      detail << name << "=error ";
      continue;
    }
    const double a = m["accuracy"].get<double>();
    detail << name << "=" << fmt(a) << " (ref " << fmt(reference.at(name)) << ") ";
    ok = ok && std::abs(a - reference.at(name)) <= 0.02;
  }
  return ok ? pass(detail.str()) : fail(detail.str());
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"metric oracle equivalence", 5, metric_oracle},
      {"SMOTE invariants", 5, smote_invariants},
      {"PCA analytic checks", 2, pca_checks},
      {"feature-selection sanity", 5, selection_sanity},
      {"classifier correctness", 60, classifier_correctness},
      {"ensemble contracts", 60, ensemble_contracts},
      {"end-to-end desk-scale run", 300, end_to_end},
      {"determinism", 600, determinism},
      {"MQTTset reference accuracies (optional, external data)", 3600, mqttset_reference},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = fail(std::string("exception: ") + e.what());
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (outcome.status != Outcome::Status::skip && elapsed > c.limit_s) {
      outcome = fail("runtime " + fmt(elapsed, 2) + " s exceeds " + fmt(c.limit_s, 0) + " s; " + outcome.detail);
    }
    const char* tag = outcome.status == Outcome::Status::pass   ? "PASS"
                      : outcome.status == Outcome::Status::skip ? "SKIP"
                                                                : "FAIL";
    failures += outcome.status == Outcome::Status::fail;
    std::cout << "[" << tag << "] " << c.name << " (" << fmt(elapsed, 2) << " s, limit " << fmt(c.limit_s, 0)
              << " s): " << outcome.detail << std::endl;
  }
  std::cout << (failures == 0 ? "all acceptance criteria met" : std::to_string(failures) + " criterion(s) failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}

#include <doctest.h>

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>

#include "fixtures.hpp"
#include "mqttids/error.hpp"
#include "mqttids/preprocess.hpp"

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

Dataset flags_dataset() {
  CsvOptions opts;
  opts.categorical_columns = {"flags"};
  return fixtures::parse("flags,x,target\n0x18,1,dos\n0x10,2,dos\n0x18,3,legitimate\n", opts);
}

std::map<int, std::size_t> histogram(const std::vector<int>& labels) {
  std::map<int, std::size_t> h;
  for (int c : labels) ++h[c];
  return h;
}

Dataset imbalanced(std::vector<std::size_t> counts, unsigned seed) {
  auto b = fixtures::blobs(std::move(counts), 3, 3.0, seed);
  return fixtures::numeric_dataset(b.x, b.y, {"a", "b", "c"});
}

}  // namespace

TEST_CASE("categorical codes follow sorted order of distinct values") {
  const Dataset ds = flags_dataset();
  const std::vector<std::string> cols{"flags"};
  const auto maps = fit_categorical_encoding(ds, cols);
  CHECK(maps.columns.at("flags") == std::map<std::string, int>{{"0x10", 0}, {"0x18", 1}});
  CHECK(maps.unknown_code("flags") == 2);

  const Dataset encoded = apply_categorical_encoding(ds, maps);
  CHECK(encoded.rows.column(0) == std::vector<double>{1, 0, 1});
  CHECK(encoded.categorical_text.empty());
  for (double v : encoded.rows.column(0)) CHECK(v < maps.unknown_code("flags"));

  // Order of rows does not change the fitted codes.
  const std::vector<std::size_t> reversed{2, 1, 0};
  CHECK(fit_categorical_encoding(ds.subset(reversed), cols).columns == maps.columns);

  const std::vector<std::string> missing{"nope"};
  CHECK(kind_of([&] { fit_categorical_encoding(ds, missing); }) == ErrorKind::MissingColumn);
}

TEST_CASE("unseen categorical values receive the reserved code") {
  CsvOptions opts;
  opts.categorical_columns = {"flags"};
  const Dataset train = fixtures::parse("flags,target\nA,dos\nB,dos\nC,dos\n", opts);
  const Dataset test = fixtures::parse("flags,target\n0xFF,dos\nB,dos\n", opts);
  const std::vector<std::string> cols{"flags"};
  const auto maps = fit_categorical_encoding(train, cols);
  const Dataset encoded = apply_categorical_encoding(test, maps);
  CHECK(encoded.rows(0, 0) == 3.0);
  CHECK(encoded.rows(1, 0) == 1.0);
}

TEST_CASE("empty categorical column set leaves data untouched") {
  auto b = fixtures::blobs({5, 5}, 2, 1.0, 3);
  const Dataset ds = fixtures::numeric_dataset(b.x, b.y, {"a", "b"});
  const auto maps = fit_categorical_encoding(ds, std::vector<std::string>{});
  CHECK(maps.columns.empty());
  CHECK(apply_categorical_encoding(ds, maps) == ds);
}

TEST_CASE("MQTTset categorical columns yield four maps") {
  std::string text = "tcp.flags,mqtt.msg,mqtt.conack.flags,mqtt.hdrflags,target\n";
  text += "0x18,0,0x00,0x30,dos\n0x10,1,0x00,0x10,legitimate\n";
  CsvOptions opts;
  opts.categorical_columns = mqttset_categorical_columns();
  const auto maps = fit_categorical_encoding(fixtures::parse(text, opts), mqttset_categorical_columns());
  CHECK(maps.columns.size() == 4);
}

TEST_CASE("stratified split sizes and per-class quotas") {
  const auto labels = fixtures::random_labels(1000, 3, 11);
  const auto split = stratified_split(labels, 0.8, 7);
  CHECK(split.train.size() == 800);
  CHECK(split.test.size() == 200);

  std::vector<std::size_t> all = split.train;
  all.insert(all.end(), split.test.begin(), split.test.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expected(1000);
  std::iota(expected.begin(), expected.end(), 0);
  CHECK(all == expected);

  std::vector<int> skewed;
  skewed.insert(skewed.end(), 600, 0);
  skewed.insert(skewed.end(), 300, 1);
  skewed.insert(skewed.end(), 100, 2);
  const auto s = stratified_split(skewed, 0.8, 1);
  std::map<int, long> counts;
  for (auto i : s.train) ++counts[skewed[i]];
  CHECK(std::labs(counts[0] - 480) <= 1);
  CHECK(std::labs(counts[1] - 240) <= 1);
  CHECK(std::labs(counts[2] - 80) <= 1);

  const auto again = stratified_split(skewed, 0.8, 1);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);
  CHECK(stratified_split(skewed, 0.8, 2).train != s.train);
}

TEST_CASE("split preconditions") {
  const std::vector<int> lonely{0, 0, 0, 1};
  CHECK(kind_of([&] { stratified_split(lonely, 0.8, 1); }) == ErrorKind::DegenerateClass);
  const std::vector<int> fine{0, 0, 1, 1};
  CHECK(kind_of([&] { stratified_split(fine, 1.0, 1); }) == ErrorKind::InvalidSpec);
  CHECK(kind_of([&] { stratified_split(fine, 0.0, 1); }) == ErrorKind::InvalidSpec);
}

TEST_CASE("stratified folds partition every class evenly") {
  const auto labels = fixtures::random_labels(1000, 3, 5);
  const auto folds = stratified_folds(labels, 5, 9);
  std::map<int, std::size_t> sizes;
  for (int f : folds) ++sizes[f];
  CHECK(sizes.size() == 5);
  for (const auto& [f, size] : sizes) CHECK(std::labs(static_cast<long>(size) - 200) <= 3);
  std::map<std::pair<int, int>, int> per;
  std::map<int, int> class_total;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++per[{labels[i], folds[i]}];
    ++class_total[labels[i]];
  }
  for (const auto& [key, count] : per) CHECK(std::abs(count - class_total[key.first] / 5) <= 1);
  const std::vector<int> small{0, 0, 0, 0, 0, 1, 1, 1};
  CHECK(kind_of([&] { stratified_folds(small, 5, 1); }) == ErrorKind::FoldTooSmall);
}

TEST_CASE("min-max scaling") {
  Matrix x(3, 2, std::vector<double>{2, 7, 4, 7, 6, 7});
  const auto params = fit_minmax(x, {"a", "b"});
  const Matrix scaled = apply_minmax(params, x);
  CHECK(scaled.column(0) == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(scaled.column(1) == std::vector<double>{0.0, 0.0, 0.0});

  Matrix train(2, 1, std::vector<double>{0, 10});
  Matrix test(1, 1, std::vector<double>{12});
  CHECK(apply_minmax(fit_minmax(train, {"a"}), test)(0, 0) == doctest::Approx(1.2).epsilon(1e-15));

  const Matrix r = fixtures::random_matrix(50, 4, 3, -5, 5);
  const Matrix rs = apply_minmax(fit_minmax(r, {"a", "b", "c", "d"}), r);
  for (double v : rs.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  auto b = fixtures::blobs({3, 3}, 2, 1.0, 1);
  Dataset ds = fixtures::numeric_dataset(b.x, b.y, {"a", "b"});
  const auto ds_params = fit_minmax(ds);
  Dataset renamed = ds;
  renamed.schema[1].name = "other";
  CHECK(kind_of([&] { apply_minmax(ds_params, renamed); }) == ErrorKind::SchemaMismatch);
}

TEST_CASE("SMOTE balances classes and interpolates between same-class parents") {
  const Dataset ds = imbalanced({100, 50, 10}, 21);
  const auto result = smote_oversample_traced(ds, {5, 99});
  const auto h = histogram(result.data.labels);
  CHECK(h.at(0) == 100);
  CHECK(h.at(1) == 100);
  CHECK(h.at(2) == 100);

  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(result.data.labels[i] == ds.labels[i]);
    for (std::size_t j = 0; j < ds.width(); ++j) CHECK(result.data.rows(i, j) == ds.rows(i, j));
  }
  REQUIRE(result.origins.size() == result.data.size() - ds.size());
  for (std::size_t s = 0; s < result.origins.size(); ++s) {
    const auto& o = result.origins[s];
    const std::size_t row = ds.size() + s;
    CHECK(ds.labels[o.base] == result.data.labels[row]);
    CHECK(ds.labels[o.neighbor] == result.data.labels[row]);
    CHECK(o.gap >= 0.0);
    CHECK(o.gap <= 1.0);
    for (std::size_t j = 0; j < ds.width(); ++j) {
      const double lo = std::min(ds.rows(o.base, j), ds.rows(o.neighbor, j));
      const double hi = std::max(ds.rows(o.base, j), ds.rows(o.neighbor, j));
      CHECK(result.data.rows(row, j) >= lo);
      CHECK(result.data.rows(row, j) <= hi);
    }
  }
  CHECK(smote_oversample(ds, {5, 99}) == result.data);
}

TEST_CASE("SMOTE neighbours are among the k nearest of the base row") {
  const Dataset ds = imbalanced({40, 12}, 4);
  const auto result = smote_oversample_traced(ds, {3, 5});
  for (const auto& o : result.origins) {
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (i == o.base || ds.labels[i] != ds.labels[o.base]) continue;
      double d = 0.0;
      for (std::size_t j = 0; j < ds.width(); ++j) d += std::pow(ds.rows(i, j) - ds.rows(o.base, j), 2);
      dist.emplace_back(d, i);
    }
    std::sort(dist.begin(), dist.end());
    bool found = false;
    for (std::size_t n = 0; n < 3; ++n) found = found || dist[n].second == o.neighbor;
    CHECK(found);
  }
}

TEST_CASE("SMOTE edge cases") {
  const Dataset balanced = imbalanced({50, 50, 50}, 2);
  CHECK(smote_oversample(balanced, {5, 1}) == balanced);

  // Class of 3 rows with k = 5 falls back to its 2 available neighbours.
  const Dataset tiny = imbalanced({20, 3}, 8);
  CHECK(histogram(smote_oversample(tiny, {5, 1}).labels).at(1) == 20);

  const Dataset single = imbalanced({20, 1}, 8);
  CHECK(kind_of([&] { smote_oversample(single, {5, 1}); }) == ErrorKind::DegenerateClass);
}

TEST_CASE("preprocess artifacts survive JSON") {
  const Dataset ds = flags_dataset();
  PreprocessArtifacts a;
  a.label_names = {"dos", "legitimate"};
  a.encoding = fit_categorical_encoding(ds, std::vector<std::string>{"flags"});
  const Dataset encoded = apply_categorical_encoding(ds, a.encoding);
  a.scaler = fit_minmax(encoded);
  a.split = SplitIndices{{0, 2}, {1}, 0.8, 17};
  a.smote = {4, 123};
  a.feature_names = encoded.feature_names();
  const auto back = artifacts_from_json(nlohmann::json::parse(to_json(a).dump()));
  CHECK(back.label_names == a.label_names);
  CHECK(back.encoding.columns == a.encoding.columns);
  CHECK(back.scaler.min == a.scaler.min);
  CHECK(back.scaler.max == a.scaler.max);
  CHECK(back.split.train == a.split.train);
  CHECK(back.split.test == a.split.test);
  CHECK(back.split.seed == 17);
  CHECK(back.smote.k_neighbors == 4);
  CHECK(back.smote.seed == 123);
  CHECK(back.feature_names == a.feature_names);
  CHECK(kind_of([] { artifacts_from_json(nlohmann::json::object()); }) == ErrorKind::MalformedDocument);
}

#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mqttids/data_ingest.hpp"
#include "mqttids/matrix.hpp"

namespace fixtures {

// Test-side randomness deliberately uses the standard distributions rather
// than the library's Rng so fixtures do not share code with the code under test.
inline mqttids::Matrix random_matrix(std::size_t rows, std::size_t cols, unsigned seed, double lo = 0.0,
                                     double hi = 1.0) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  mqttids::Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(gen);
  return m;
}

inline std::vector<int> random_labels(std::size_t n, int n_classes, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_int_distribution<int> dist(0, n_classes - 1);
  std::vector<int> y(n);
  for (int& v : y) v = dist(gen);
  return y;
}

struct Blobs {
  mqttids::Matrix x;
  std::vector<int> y;
};

// Isotropic Gaussian blobs with class c centred at c * gap on every axis.
inline Blobs blobs(std::vector<std::size_t> counts, std::size_t d, double gap, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Blobs b;
  std::size_t total = 0;
  for (auto c : counts) total += c;
  b.x = mqttids::Matrix(total, d);
  std::size_t r = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    for (std::size_t i = 0; i < counts[c]; ++i, ++r) {
      for (std::size_t j = 0; j < d; ++j) b.x(r, j) = static_cast<double>(c) * gap + noise(gen);
      b.y.push_back(static_cast<int>(c));
    }
  }
  return b;
}

inline mqttids::Dataset numeric_dataset(const mqttids::Matrix& x, const std::vector<int>& y,
                                        std::vector<std::string> label_names) {
  mqttids::Dataset ds;
  for (std::size_t j = 0; j < x.cols(); ++j) {
    ds.schema.push_back({"f" + std::to_string(j), mqttids::ColumnKind::numeric, j});
  }
  ds.rows = x;
  ds.labels = y;
  ds.label_names = std::move(label_names);
  ds.labels_encoded = true;
  return ds;
}

inline mqttids::Dataset parse(const std::string& text, const mqttids::CsvOptions& options = {}) {
  std::istringstream in(text);
  return mqttids::parse_csv(in, options);
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("mqttids_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures

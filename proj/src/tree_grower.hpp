#pragma once

// Presorted CART growth shared by the classification trees and the boosting
// trees. Each feature keeps its own ordering of sample positions; a node owns
// the same [begin, end) slice in every ordering and a split partitions all
// slices stably, so no node ever re-sorts.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "mqttids/classifiers.hpp"
#include "mqttids/matrix.hpp"
#include "mqttids/rng.hpp"

namespace mqttids::detail {

struct ColumnData {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> values;                           // column-major
  std::vector<std::vector<std::uint32_t>> sorted_rows;  // by (value, row)

  explicit ColumnData(const Matrix& x) : n(x.rows()), d(x.cols()), values(x.rows() * x.cols()) {
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < d; ++j) values[j * n + r] = x(r, j);
    }
    sorted_rows.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      auto& order = sorted_rows[j];
      order.resize(n);
      std::iota(order.begin(), order.end(), 0u);
      const double* col = values.data() + j * n;
      std::sort(order.begin(), order.end(), [col](std::uint32_t a, std::uint32_t b) {
        return col[a] < col[b] || (col[a] == col[b] && a < b);
      });
    }
  }

  double at(std::size_t row, std::size_t j) const { return values[j * n + row]; }
};

struct GrowLimits {
  int max_depth = 0;
  std::size_t min_samples_split = 2;
  std::size_t max_features = 0;
  std::uint64_t seed = 0;
};

inline double midpoint(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return mid < hi ? mid : lo;
}

// Criterion requirements:
//   using Stats;
//   Stats node_stats(span<const uint32_t> positions) const;
//   bool terminal(const Stats&) const;
//   void scan_begin(const Stats&);  void scan_add(uint32_t position);
//   bool scan_valid() const;        double scan_score() const;
//   bool accept(double best_score, const Stats&) const;
//   void fill_leaf(TreeNode&, const Stats&) const;
template <class Criterion>
Tree grow_tree(const ColumnData& cols, std::span<const std::size_t> sample, Criterion& crit,
               const GrowLimits& limits) {
  const std::size_t m = sample.size();
  const std::size_t d = cols.d;

  // Per-feature position orderings derived from the global presort.
  std::vector<std::uint32_t> offsets(cols.n + 1, 0);
  for (std::size_t row : sample) ++offsets[row + 1];
  for (std::size_t r = 0; r < cols.n; ++r) offsets[r + 1] += offsets[r];
  std::vector<std::uint32_t> positions_of_row(m);
  {
    std::vector<std::uint32_t> fill(offsets.begin(), offsets.end() - 1);
    for (std::size_t p = 0; p < m; ++p) positions_of_row[fill[sample[p]]++] = static_cast<std::uint32_t>(p);
  }
  std::vector<std::vector<std::uint32_t>> sorted(d);
  for (std::size_t j = 0; j < d; ++j) {
    auto& order = sorted[j];
    order.reserve(m);
    for (std::uint32_t row : cols.sorted_rows[j]) {
      for (std::uint32_t k = offsets[row]; k < offsets[row + 1]; ++k) order.push_back(positions_of_row[k]);
    }
  }
  auto value_at = [&](std::uint32_t position, std::size_t j) { return cols.at(sample[position], j); };

  Rng rng(limits.seed);
  Tree tree;
  tree.nodes.emplace_back();
  struct Pending {
    int node;
    std::size_t begin;
    std::size_t end;
    int depth;
  };
  std::vector<Pending> stack{{0, 0, m, 0}};
  std::vector<char> goes_left(m, 0);
  std::vector<std::uint32_t> buffer(m);
  std::vector<std::size_t> feature_order(d);

  while (!stack.empty()) {
    const Pending job = stack.back();
    stack.pop_back();
    const std::size_t count = job.end - job.begin;
    const auto stats = crit.node_stats(std::span<const std::uint32_t>(sorted[0].data() + job.begin, count));

    const bool depth_capped = limits.max_depth > 0 && job.depth >= limits.max_depth;
    if (count == 0 || crit.terminal(stats) || count < limits.min_samples_split || depth_capped) {
      crit.fill_leaf(tree.nodes[job.node], stats);
      continue;
    }

    std::iota(feature_order.begin(), feature_order.end(), 0);
    std::size_t first_batch = d;
    if (limits.max_features > 0 && limits.max_features < d) {
      for (std::size_t i = 0; i < d; ++i) {
        const std::size_t pick = i + static_cast<std::size_t>(rng.below(d - i));
        std::swap(feature_order[i], feature_order[pick]);
      }
      first_batch = limits.max_features;
      std::sort(feature_order.begin(), feature_order.begin() + static_cast<std::ptrdiff_t>(first_batch));
    }

    bool found = false;
    double best_score = 0.0;
    std::size_t best_feature = 0;
    double best_threshold = 0.0;
    auto search_feature = [&](std::size_t j) {
      const auto& order = sorted[j];
      crit.scan_begin(stats);
      for (std::size_t i = job.begin; i + 1 < job.end; ++i) {
        crit.scan_add(order[i]);
        const double lo = value_at(order[i], j);
        const double hi = value_at(order[i + 1], j);
        if (!(lo < hi) || !crit.scan_valid()) continue;
        const double score = crit.scan_score();
        if (!found || score > best_score) {
          found = true;
          best_score = score;
          best_feature = j;
          best_threshold = midpoint(lo, hi);
        }
      }
    };
    for (std::size_t i = 0; i < first_batch; ++i) search_feature(feature_order[i]);
    // If every drawn feature was constant here, keep drawing one at a time.
    for (std::size_t i = first_batch; !found && i < d; ++i) search_feature(feature_order[i]);

    if (!found || !crit.accept(best_score, stats)) {
      crit.fill_leaf(tree.nodes[job.node], stats);
      continue;
    }

    std::size_t left_count = 0;
    for (std::size_t i = job.begin; i < job.end; ++i) {
      const std::uint32_t p = sorted[best_feature][i];
      goes_left[p] = value_at(p, best_feature) <= best_threshold ? 1 : 0;
      left_count += goes_left[p];
    }
    for (std::size_t j = 0; j < d; ++j) {
      auto& order = sorted[j];
      std::size_t l = job.begin;
      std::size_t r = 0;
      for (std::size_t i = job.begin; i < job.end; ++i) {
        if (goes_left[order[i]]) {
          order[l++] = order[i];
        } else {
          buffer[r++] = order[i];
        }
      }
      std::copy(buffer.begin(), buffer.begin() + static_cast<std::ptrdiff_t>(r), order.begin() + static_cast<std::ptrdiff_t>(l));
    }

    const int left_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const int right_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    TreeNode& node = tree.nodes[job.node];
    node.feature = static_cast<int>(best_feature);
    node.threshold = best_threshold;
    node.left = left_id;
    node.right = right_id;
    const std::size_t mid = job.begin + left_count;
    stack.push_back({right_id, mid, job.end, job.depth + 1});
    stack.push_back({left_id, job.begin, mid, job.depth + 1});
  }
  return tree;
}

// Gini impurity; maximises sum_L c^2 / n_L + sum_R c^2 / n_R.
class GiniCriterion {
 public:
  struct Stats {
    std::vector<double> counts;
    double n = 0.0;
    double sum_sq = 0.0;
  };

  GiniCriterion(std::span<const int> y, std::span<const std::size_t> sample, int n_classes,
                double min_impurity_decrease)
      : y_(y), sample_(sample), n_classes_(n_classes), total_(static_cast<double>(sample.size())),
        min_decrease_(min_impurity_decrease) {}

  Stats node_stats(std::span<const std::uint32_t> positions) const {
    Stats s;
    s.counts.assign(static_cast<std::size_t>(n_classes_), 0.0);
    for (std::uint32_t p : positions) s.counts[y_[sample_[p]]] += 1.0;
    s.n = static_cast<double>(positions.size());
    for (double c : s.counts) s.sum_sq += c * c;
    return s;
  }

  bool terminal(const Stats& s) const {
    return std::count_if(s.counts.begin(), s.counts.end(), [](double c) { return c > 0.0; }) <= 1;
  }

  void scan_begin(const Stats& node) {
    left_.assign(node.counts.size(), 0.0);
    right_ = node.counts;
    n_left_ = 0.0;
    n_right_ = node.n;
    sq_left_ = 0.0;
    sq_right_ = node.sum_sq;
  }

  void scan_add(std::uint32_t position) {
    const int c = y_[sample_[position]];
    sq_left_ += 2.0 * left_[c] + 1.0;
    left_[c] += 1.0;
    sq_right_ -= 2.0 * right_[c] - 1.0;
    right_[c] -= 1.0;
    n_left_ += 1.0;
    n_right_ -= 1.0;
  }

  bool scan_valid() const { return n_left_ > 0.0 && n_right_ > 0.0; }
  double scan_score() const { return sq_left_ / n_left_ + sq_right_ / n_right_; }

  bool accept(double best_score, const Stats& s) const {
    const double decrease = (best_score - s.sum_sq / s.n) / total_;
    return decrease + 1e-12 >= min_decrease_;
  }

  void fill_leaf(TreeNode& node, const Stats& s) const {
    node.feature = -1;
    node.value.assign(s.counts.size(), 0.0);
    if (s.n > 0.0) {
      for (std::size_t c = 0; c < s.counts.size(); ++c) node.value[c] = s.counts[c] / s.n;
    }
    node.predicted = argmax_lowest(node.value);
  }

 private:
  std::span<const int> y_;
  std::span<const std::size_t> sample_;
  int n_classes_;
  double total_;
  double min_decrease_;
  std::vector<double> left_;
  std::vector<double> right_;
  double n_left_ = 0.0;
  double n_right_ = 0.0;
  double sq_left_ = 0.0;
  double sq_right_ = 0.0;
};

// Second-order (Newton) boosting criterion with L2 leaf regularisation.
class NewtonCriterion {
 public:
  struct Stats {
    double g = 0.0;
    double h = 0.0;
  };

  NewtonCriterion(std::span<const double> grad, std::span<const double> hess,
                  std::span<const std::size_t> sample, double lambda, double min_child_weight,
                  double gamma, double learning_rate)
      : grad_(grad), hess_(hess), sample_(sample), lambda_(lambda), min_child_weight_(min_child_weight),
        gamma_(gamma), learning_rate_(learning_rate) {}

  Stats node_stats(std::span<const std::uint32_t> positions) const {
    Stats s;
    for (std::uint32_t p : positions) {
      s.g += grad_[sample_[p]];
      s.h += hess_[sample_[p]];
    }
    return s;
  }

  bool terminal(const Stats& s) const { return s.h < 2.0 * min_child_weight_; }

  void scan_begin(const Stats& node) {
    node_ = node;
    left_ = {};
  }

  void scan_add(std::uint32_t position) {
    left_.g += grad_[sample_[position]];
    left_.h += hess_[sample_[position]];
  }

  bool scan_valid() const {
    return left_.h >= min_child_weight_ && node_.h - left_.h >= min_child_weight_;
  }

  double scan_score() const {
    const double gr = node_.g - left_.g;
    const double hr = node_.h - left_.h;
    return left_.g * left_.g / (left_.h + lambda_) + gr * gr / (hr + lambda_);
  }

  bool accept(double best_score, const Stats& s) const {
    const double gain = 0.5 * (best_score - s.g * s.g / (s.h + lambda_)) - gamma_;
    return gain > 1e-12;
  }

  void fill_leaf(TreeNode& node, const Stats& s) const {
    node.feature = -1;
    node.value = {-s.g / (s.h + lambda_) * learning_rate_};
    node.predicted = 0;
  }

 private:
  std::span<const double> grad_;
  std::span<const double> hess_;
  std::span<const std::size_t> sample_;
  double lambda_;
  double min_child_weight_;
  double gamma_;
  double learning_rate_;
  Stats node_{};
  Stats left_{};
};

}  // namespace mqttids::detail

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "rmstboost/error.hpp"
#include "rmstboost/matrix.hpp"

namespace rmstboost {

struct BoostConfig {
  int num_trees = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  double lambda_l2 = 1.0;
  double gamma_split = 0.0;
  // Constant per-instance curvature standing in for a second-order term.
  double hessian_const = 0.001;
  double min_child_weight = 0.0;
  int min_samples_leaf = 1;
  // Boost against the per-patient loss -V/n instead of -V.
  bool normalize_loss = true;

  void validate() const {
    using detail::require;
    require(num_trees >= 0, "num_trees must be nonnegative");
    require(learning_rate > 0.0 && learning_rate <= 1.0, "learning_rate must lie in (0, 1]");
    require(max_depth >= 1, "max_depth must be positive");
    require(std::isfinite(lambda_l2) && lambda_l2 >= 0.0, "lambda_l2 must be nonnegative");
    require(std::isfinite(gamma_split) && gamma_split >= 0.0, "gamma_split must be nonnegative");
    require(std::isfinite(hessian_const) && hessian_const > 0.0, "hessian_const must be positive");
    require(std::isfinite(min_child_weight) && min_child_weight >= 0.0,
            "min_child_weight must be nonnegative");
    require(min_samples_leaf >= 1, "min_samples_leaf must be positive");
  }

  friend bool operator==(const BoostConfig&, const BoostConfig&) = default;
};

struct TreeNode {
  static constexpr int kLeaf = -1;

  int split_feature = kLeaf;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double leaf_value = 0.0;  // also kept on internal nodes for inspection
  double gain = 0.0;
  double cover = 0.0;  // hessian mass routed to the node

  bool is_leaf() const noexcept { return split_feature == kLeaf; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

// Binary regression tree; node 0 is the root. Rows with
// feature < threshold go left.
struct Tree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const noexcept {
    int at = 0;
    while (!nodes[static_cast<std::size_t>(at)].is_leaf()) {
      const auto& node = nodes[static_cast<std::size_t>(at)];
      at = x[static_cast<std::size_t>(node.split_feature)] < node.threshold ? node.left
                                                                             : node.right;
    }
    return nodes[static_cast<std::size_t>(at)].leaf_value;
  }

  int depth() const noexcept { return nodes.empty() ? 0 : depth_from(0); }

  friend bool operator==(const Tree&, const Tree&) = default;

 private:
  int depth_from(int at) const noexcept {
    const auto& node = nodes[static_cast<std::size_t>(at)];
    if (node.is_leaf()) return 0;
    return 1 + std::max(depth_from(node.left), depth_from(node.right));
  }
};

// Regularized structure score of a node under constant curvature.
inline double leaf_weight(double grad_sum, double hess_sum, double lambda) noexcept {
  return -grad_sum / (hess_sum + lambda);
}

inline double split_gain(double grad_left, double hess_left, double grad_right,
                         double hess_right, double lambda, double gamma) noexcept {
  const double g = grad_left + grad_right;
  const double h = hess_left + hess_right;
  return 0.5 * (grad_left * grad_left / (hess_left + lambda) +
                grad_right * grad_right / (hess_right + lambda) - g * g / (h + lambda)) -
         gamma;
}

// Midpoint between two consecutive distinct sorted values, never equal to lo.
inline double midpoint_threshold(double lo, double hi) noexcept {
  const double mid = lo + (hi - lo) / 2.0;
  return lo < mid ? mid : hi;
}

// Per-feature row orderings, reusable across all trees of one fit.
class SortedColumns {
 public:
  explicit SortedColumns(const Matrix& x) : order_(x.cols()) {
    for (std::size_t f = 0; f < x.cols(); ++f) {
      auto& ord = order_[f];
      ord.resize(x.rows());
      std::iota(ord.begin(), ord.end(), std::uint32_t{0});
      std::stable_sort(ord.begin(), ord.end(),
                       [&](std::uint32_t a, std::uint32_t b) { return x(a, f) < x(b, f); });
    }
  }
  const std::vector<std::uint32_t>& feature(std::size_t f) const noexcept { return order_[f]; }
  std::size_t num_features() const noexcept { return order_.size(); }

 private:
  std::vector<std::vector<std::uint32_t>> order_;
};

namespace detail {

// Relative slack under which two gains are treated as tied.
inline constexpr double kGainTieTolerance = 1e-12;

struct SplitCandidate {
  int feature = TreeNode::kLeaf;
  double threshold = 0.0;
  double gain = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const double> g, const BoostConfig& config)
      : x_(x), g_(g), config_(config), go_left_(x.rows(), 0) {}

  Tree build(const SortedColumns& sorted) {
    std::vector<std::vector<std::uint32_t>> orders(sorted.num_features());
    for (std::size_t f = 0; f < orders.size(); ++f) orders[f] = sorted.feature(f);
    std::vector<std::uint32_t> rows(x_.rows());
    std::iota(rows.begin(), rows.end(), std::uint32_t{0});
    Tree tree;
    grow(tree, std::move(rows), std::move(orders), 0);
    return tree;
  }

 private:
  int grow(Tree& tree, std::vector<std::uint32_t> rows,
           std::vector<std::vector<std::uint32_t>> orders, int depth) {
    const auto at = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    double grad = 0.0;
    for (auto r : rows) grad += g_[r];
    const double hess = config_.hessian_const * static_cast<double>(rows.size());
    {
      auto& node = tree.nodes.back();
      node.leaf_value = leaf_weight(grad, hess, config_.lambda_l2);
      node.cover = hess;
    }
    if (depth >= config_.max_depth) return at;
    const auto best = find_split(rows, orders, grad);
    if (best.feature == TreeNode::kLeaf) return at;

    const auto f = static_cast<std::size_t>(best.feature);
    std::vector<std::uint32_t> left_rows, right_rows;
    for (auto r : rows) {
      go_left_[r] = x_(r, f) < best.threshold;
      (go_left_[r] ? left_rows : right_rows).push_back(r);
    }
    std::vector<std::vector<std::uint32_t>> left_orders(orders.size()), right_orders(orders.size());
    for (std::size_t k = 0; k < orders.size(); ++k) {
      left_orders[k].reserve(left_rows.size());
      right_orders[k].reserve(right_rows.size());
      for (auto r : orders[k]) (go_left_[r] ? left_orders[k] : right_orders[k]).push_back(r);
    }
    orders.clear();
    rows.clear();

    const int left = grow(tree, std::move(left_rows), std::move(left_orders), depth + 1);
    const int right = grow(tree, std::move(right_rows), std::move(right_orders), depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(at)];
    node.split_feature = best.feature;
    node.threshold = best.threshold;
    node.gain = best.gain;
    node.left = left;
    node.right = right;
    return at;
  }

  SplitCandidate find_split(const std::vector<std::uint32_t>& rows,
                            const std::vector<std::vector<std::uint32_t>>& orders,
                            double grad) const {
    SplitCandidate best;
    const std::size_t m = rows.size();
    const auto min_leaf = static_cast<std::size_t>(config_.min_samples_leaf);
    if (m < 2 * min_leaf) return best;
    const double h0 = config_.hessian_const;
    const double hess = h0 * static_cast<double>(m);
    for (std::size_t f = 0; f < orders.size(); ++f) {
      const auto& ord = orders[f];
      double grad_left = 0.0;
      for (std::size_t c = 1; c < m; ++c) {
        grad_left += g_[ord[c - 1]];
        const double lo = x_(ord[c - 1], f);
        const double hi = x_(ord[c], f);
        if (!(lo < hi)) continue;
        if (c < min_leaf || m - c < min_leaf) continue;
        const double hess_left = h0 * static_cast<double>(c);
        const double hess_right = hess - hess_left;
        if (hess_left < config_.min_child_weight || hess_right < config_.min_child_weight)
          continue;
        const double gain = split_gain(grad_left, hess_left, grad - grad_left, hess_right,
                                       config_.lambda_l2, config_.gamma_split);
        if (!(gain > 0.0)) continue;
        const double slack = kGainTieTolerance * std::max(1.0, std::abs(best.gain));
        if (best.feature == TreeNode::kLeaf || gain > best.gain + slack) {
          best.feature = static_cast<int>(f);
          best.threshold = midpoint_threshold(lo, hi);
          best.gain = gain;
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  std::span<const double> g_;
  const BoostConfig& config_;
  std::vector<char> go_left_;
};

inline void check_tree_inputs(const Matrix& x, std::span<const double> gradients,
                              const BoostConfig& config) {
  config.validate();
  require(x.rows() > 0, "cannot fit a tree on zero rows");
  require(gradients.size() == x.rows(), "gradient length does not match row count");
  for (double g : gradients)
    if (!std::isfinite(g)) throw NumericalError("non-finite gradient passed to fit_tree");
}

}  // namespace detail

// Exact greedy regression tree on first-order targets with constant curvature.
inline Tree fit_tree(const Matrix& covariates, std::span<const double> gradients,
                     const BoostConfig& config, const SortedColumns& sorted) {
  detail::check_tree_inputs(covariates, gradients, config);
  detail::require(sorted.num_features() == covariates.cols(), "sorted columns do not match");
  return detail::TreeBuilder(covariates, gradients, config).build(sorted);
}

inline Tree fit_tree(const Matrix& covariates, std::span<const double> gradients,
                     const BoostConfig& config) {
  detail::check_tree_inputs(covariates, gradients, config);
  return fit_tree(covariates, gradients, config, SortedColumns(covariates));
}

}  // namespace rmstboost

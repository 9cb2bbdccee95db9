#include "rmstboost/tree.hpp"

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "rmstboost/random.hpp"

namespace rmstboost {
namespace {

BoostConfig stump_config(int depth = 1) {
  BoostConfig c;
  c.max_depth = depth;
  c.lambda_l2 = 0.0;
  return c;
}

Matrix column(const std::vector<double>& x) {
  Matrix m(x.size(), 1);
  for (std::size_t i = 0; i < x.size(); ++i) m(i, 0) = x[i];
  return m;
}

TEST(FitTree, ThreePointStump) {
  const auto x = column({1.0, 2.0, 3.0});
  const std::vector<double> g = {-2.0, -2.0, 4.0};
  const auto t = fit_tree(x, g, stump_config());
  ASSERT_EQ(t.nodes.size(), 3u);
  const auto& root = t.nodes[0];
  EXPECT_EQ(root.split_feature, 0);
  EXPECT_DOUBLE_EQ(root.threshold, 2.5);
  EXPECT_NEAR(root.gain, 12000.0, 1e-6);
  EXPECT_NEAR(t.nodes[static_cast<std::size_t>(root.left)].leaf_value, 2000.0, 1e-9);
  EXPECT_NEAR(t.nodes[static_cast<std::size_t>(root.right)].leaf_value, -4000.0, 1e-9);
  EXPECT_NEAR(t.predict(std::vector<double>{2.4}), 2000.0, 1e-9);
  EXPECT_NEAR(t.predict(std::vector<double>{2.5}), -4000.0, 1e-9);
}

TEST(FitTree, GammaAboveBestGainLeavesSingleLeaf) {
  const auto x = column({1.0, 2.0, 3.0});
  const std::vector<double> g = {-2.0, -2.0, 4.0};
  auto c = stump_config();
  c.gamma_split = 12001.0;
  const auto t = fit_tree(x, g, c);
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_NEAR(t.nodes[0].leaf_value, 0.0, 1e-12);
}

TEST(FitTree, ConstantGradientGivesNoSplit) {
  Rng rng(1);
  Matrix x(50, 3);
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t j = 0; j < 3; ++j) x(i, j) = rng.normal();
  const std::vector<double> g(50, 0.7);
  BoostConfig c;
  const auto t = fit_tree(x, g, c);
  // Any split has zero gain up to rounding; none may beat gamma = 0 strictly
  // by more than the tie tolerance, so the root stays a leaf.
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_NEAR(t.nodes[0].leaf_value, leaf_weight(35.0, 50 * c.hessian_const, c.lambda_l2), 1e-12);
}

TEST(FitTree, LeafValuesFollowClosedForm) {
  Rng rng(2);
  Matrix x(200, 4);
  std::vector<double> g(200);
  for (std::size_t i = 0; i < 200; ++i) {
    for (std::size_t j = 0; j < 4; ++j) x(i, j) = rng.normal();
    g[i] = x(i, 1) + 0.3 * rng.normal();
  }
  BoostConfig c;
  c.max_depth = 3;
  const auto t = fit_tree(x, g, c);
  EXPECT_LE(t.depth(), 3);
  std::vector<double> sum(t.nodes.size(), 0.0);
  std::vector<int> count(t.nodes.size(), 0);
  for (std::size_t i = 0; i < 200; ++i) {
    int at = 0;
    while (!t.nodes[static_cast<std::size_t>(at)].is_leaf()) {
      const auto& nd = t.nodes[static_cast<std::size_t>(at)];
      at = x(i, static_cast<std::size_t>(nd.split_feature)) < nd.threshold ? nd.left : nd.right;
    }
    sum[static_cast<std::size_t>(at)] += g[i];
    ++count[static_cast<std::size_t>(at)];
  }
  for (std::size_t k = 0; k < t.nodes.size(); ++k) {
    if (!t.nodes[k].is_leaf()) continue;
    EXPECT_GE(count[k], 1);
    EXPECT_NEAR(t.nodes[k].leaf_value,
                leaf_weight(sum[k], count[k] * c.hessian_const, c.lambda_l2), 1e-9);
  }
}

TEST(FitTree, DepthBoundHolds) {
  Rng rng(3);
  for (int depth = 1; depth <= 5; ++depth) {
    Matrix x(300, 2);
    std::vector<double> g(300);
    for (std::size_t i = 0; i < 300; ++i) {
      x(i, 0) = rng.uniform();
      x(i, 1) = rng.uniform();
      g[i] = rng.normal();
    }
    auto c = stump_config(depth);
    EXPECT_LE(fit_tree(x, g, c).depth(), depth);
  }
}

// Exhaustive search over every (feature, threshold) pair.
TEST(FitTree, RootSplitMatchesBruteForce) {
  Rng rng(4);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 20 + static_cast<std::size_t>(trial);
    Matrix x(n, 3);
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < 3; ++j) x(i, j) = std::round(rng.normal() * 4.0) / 4.0;
      g[i] = rng.normal() + (x(i, 2) > 0 ? 1.0 : 0.0);
    }
    BoostConfig c;
    c.max_depth = 1;
    double best = 0.0;
    int best_f = -1;
    double best_thr = 0.0;
    for (std::size_t f = 0; f < 3; ++f) {
      std::vector<double> vals;
      for (std::size_t i = 0; i < n; ++i) vals.push_back(x(i, f));
      std::sort(vals.begin(), vals.end());
      vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
      for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
        const double thr = midpoint_threshold(vals[k], vals[k + 1]);
        double gl = 0, gr = 0, hl = 0, hr = 0;
        for (std::size_t i = 0; i < n; ++i) {
          if (x(i, f) < thr) {
            gl += g[i];
            hl += c.hessian_const;
          } else {
            gr += g[i];
            hr += c.hessian_const;
          }
        }
        const double gain = split_gain(gl, hl, gr, hr, c.lambda_l2, c.gamma_split);
        if (gain > 0.0 && (best_f < 0 || gain > best + 1e-12 * std::max(1.0, best))) {
          best = gain;
          best_f = static_cast<int>(f);
          best_thr = thr;
        }
      }
    }
    const auto t = fit_tree(x, g, c);
    if (best_f < 0) {
      EXPECT_EQ(t.nodes.size(), 1u);
      continue;
    }
    ASSERT_EQ(t.nodes.size(), 3u);
    EXPECT_EQ(t.nodes[0].split_feature, best_f);
    EXPECT_DOUBLE_EQ(t.nodes[0].threshold, best_thr);
    EXPECT_NEAR(t.nodes[0].gain, best, 1e-9 * best);
  }
}

TEST(FitTree, TiesPreferLowestFeature) {
  Matrix x(4, 2);
  for (std::size_t i = 0; i < 4; ++i) x(i, 0) = x(i, 1) = static_cast<double>(i);
  const std::vector<double> g = {-1.0, -1.0, 1.0, 1.0};
  const auto t = fit_tree(x, g, stump_config());
  EXPECT_EQ(t.nodes[0].split_feature, 0);
}

TEST(FitTree, DeterministicAcrossCalls) {
  Rng rng(5);
  Matrix x(100, 5);
  std::vector<double> g(100);
  for (std::size_t i = 0; i < 100; ++i) {
    for (std::size_t j = 0; j < 5; ++j) x(i, j) = rng.normal();
    g[i] = rng.normal();
  }
  BoostConfig c;
  EXPECT_EQ(fit_tree(x, g, c), fit_tree(x, g, c));
  EXPECT_EQ(fit_tree(x, g, c), fit_tree(x, g, c, SortedColumns(x)));
}

TEST(FitTree, MinSamplesLeafRespected) {
  const auto x = column({1.0, 2.0, 3.0, 4.0, 5.0});
  const std::vector<double> g = {10.0, -1.0, -1.0, -1.0, -1.0};
  auto c = stump_config();
  c.min_samples_leaf = 2;
  const auto t = fit_tree(x, g, c);
  ASSERT_EQ(t.nodes.size(), 3u);
  EXPECT_DOUBLE_EQ(t.nodes[0].threshold, 2.5);
}

TEST(FitTree, RejectsBadInputs) {
  const auto x = column({1.0, 2.0});
  BoostConfig c;
  EXPECT_THROW(fit_tree(x, std::vector<double>{1.0}, c), UsageError);
  EXPECT_THROW(fit_tree(Matrix(0, 1), std::vector<double>{}, c), UsageError);
  EXPECT_THROW(fit_tree(x, std::vector<double>{1.0, std::numeric_limits<double>::infinity()}, c),
               NumericalError);
  c.max_depth = 0;
  EXPECT_THROW(fit_tree(x, std::vector<double>{1.0, 2.0}, c), UsageError);
}

TEST(Midpoint, NeverEqualsLowerValue) {
  const double lo = 1.0;
  const double hi = std::nextafter(1.0, 2.0);
  EXPECT_GT(midpoint_threshold(lo, hi), lo);
  EXPECT_DOUBLE_EQ(midpoint_threshold(1.0, 2.0), 1.5);
}

}  // namespace
}  // namespace rmstboost

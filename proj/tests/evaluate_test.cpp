#include "rmstboost/evaluate.hpp"

#include <atomic>
#include <set>
#include <stdexcept>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace rmstboost {
namespace {

using testing::make_dataset;

Dataset trial(int scenario, std::size_t n, std::uint64_t seed, std::size_t q = 5) {
  SimConfig c;
  c.scenario = scenario;
  c.n = n;
  c.q = q;
  c.seed = seed;
  return simulate(c);
}

CvGrid tiny_grid() {
  CvGrid g;
  g.learning_rates = {0.1, 0.3};
  g.max_depths = {1, 2};
  g.num_trees = {5, 10};
  g.folds = 3;
  g.seed = 4;
  return g;
}

TEST(FillClassification, CountsAndAbsentClasses) {
  Metrics m;
  fill_classification(m, {1, 0, 1, 0}, {1, 1, 0, 0});
  EXPECT_DOUBLE_EQ(*m.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(*m.sensitivity, 0.5);
  EXPECT_DOUBLE_EQ(*m.specificity, 0.5);
  Metrics all_pos;
  fill_classification(all_pos, {1, 1}, {1, 1});
  EXPECT_DOUBLE_EQ(*all_pos.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(*all_pos.specificity, 0.0);
  EXPECT_THROW(fill_classification(m, {1}, {1, 0}), UsageError);
}

TEST(HardValue, FourPatientExamplePerPatient) {
  const auto d = make_dataset({{10.0, 1, 1}, {4.0, 1, 0}, {3.0, 1, 1}, {8.0, 1, 0}});
  EXPECT_NEAR(hard_value(d, {1, 1, 0, 0}, TimeHorizon(10.0)), 13.906652294228271 / 4.0, 1e-4);
}

TEST(HardValue, InvariantToRowOrder) {
  const auto d = trial(2, 300, 1);
  const auto h = default_horizon(d);
  const auto& g = *d.true_membership;
  std::vector<std::size_t> perm(d.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(2);
  shuffle(perm, rng);
  std::vector<int> pg;
  for (auto i : perm) pg.push_back(g[i]);
  EXPECT_NEAR(hard_value(d, g, h), hard_value(d.select_rows(perm), pg, h), 1e-9);
}

TEST(Evaluate, PerfectClassifierOnTruthAndSoftMode) {
  const auto d = trial(1, 400, 3);
  BoostConfig c;
  c.num_trees = 20;
  const auto model = boost_fit(d, c, default_horizon(d));
  const auto hard = evaluate(model, d, 0.5, default_horizon(d));
  ASSERT_TRUE(hard.accuracy.has_value());
  EXPECT_GT(*hard.accuracy, 0.7);
  const auto soft = evaluate(model, d, 0.5, default_horizon(d), MembershipMode::kSoft);
  EXPECT_EQ(soft.accuracy, hard.accuracy);
  EXPECT_NE(soft.value_hat, hard.value_hat);
}

TEST(FoldAssignment, PartitionsRowsEvenly) {
  const auto f = fold_assignment(23, 5, 7);
  std::vector<int> counts(5, 0);
  for (int k : f) {
    ASSERT_GE(k, 0);
    ASSERT_LT(k, 5);
    ++counts[static_cast<std::size_t>(k)];
  }
  EXPECT_EQ(counts, (std::vector<int>{5, 5, 5, 4, 4}));
  EXPECT_EQ(fold_assignment(23, 5, 7), f);
  EXPECT_NE(fold_assignment(23, 5, 8), f);
  EXPECT_THROW(fold_assignment(3, 5, 1), UsageError);
  EXPECT_THROW(fold_assignment(10, 1, 1), UsageError);
}

TEST(CrossValidate, SingletonGridReturnsItsPoint) {
  const auto d = trial(1, 150, 5);
  CvGrid g = tiny_grid();
  g.learning_rates = {0.2};
  g.max_depths = {2};
  g.num_trees = {7};
  const auto r = cross_validate(d, g, HorizonPolicy{});
  ASSERT_EQ(r.scores.size(), 1u);
  EXPECT_EQ(r.best.learning_rate, 0.2);
  EXPECT_EQ(r.best.max_depth, 2);
  EXPECT_EQ(r.best.num_trees, 7);
  EXPECT_EQ(r.scores[0].fold_values.size(), 3u);
}

TEST(CrossValidate, SelectsBestMeanWithDeterministicTies) {
  const auto d = trial(3, 200, 6);
  const auto g = tiny_grid();
  const auto r = cross_validate(d, g, HorizonPolicy{});
  ASSERT_EQ(r.scores.size(), 8u);
  double best = -1e300;
  for (const auto& s : r.scores) best = std::max(best, s.mean_value);
  const CvScore* chosen = nullptr;
  for (const auto& s : r.scores)
    if (s.config == r.best) chosen = &s;
  ASSERT_NE(chosen, nullptr);
  EXPECT_EQ(chosen->mean_value, best);
  for (const auto& s : r.scores) {
    if (s.mean_value != best) continue;
    EXPECT_LE(std::make_tuple(chosen->config.num_trees, chosen->config.max_depth,
                              chosen->config.learning_rate),
              std::make_tuple(s.config.num_trees, s.config.max_depth, s.config.learning_rate));
  }
}

TEST(CrossValidate, TruncatedScoresMatchDirectFits) {
  const auto d = trial(1, 120, 9);
  CvGrid g = tiny_grid();
  g.learning_rates = {0.3};
  g.max_depths = {2};
  const auto full = cross_validate(d, g, HorizonPolicy{});
  g.num_trees = {5};
  const auto single = cross_validate(d, g, HorizonPolicy{});
  EXPECT_EQ(single.scores[0].fold_values, full.scores[0].fold_values);
}

TEST(CrossValidate, ThreadCountDoesNotChangeResult) {
  const auto d = trial(4, 150, 10);
  const auto g = tiny_grid();
  const auto a = cross_validate(d, g, HorizonPolicy{}, 1);
  const auto b = cross_validate(d, g, HorizonPolicy{}, 4);
  ASSERT_EQ(a.scores.size(), b.scores.size());
  for (std::size_t k = 0; k < a.scores.size(); ++k)
    EXPECT_EQ(a.scores[k].fold_values, b.scores[k].fold_values);
  EXPECT_EQ(a.best, b.best);
}

TEST(Benchmark, SingleReplicateSummaries) {
  BenchmarkRequest req;
  req.scenarios = {2};
  req.replicates = 1;
  req.n_train = 120;
  req.n_valid = 200;
  req.sim.q = 4;
  req.grid = tiny_grid();
  const auto rep = benchmark(req);
  ASSERT_EQ(rep.scenarios.size(), 1u);
  const auto& s = rep.scenarios[0];
  EXPECT_EQ(s.per_replicate.size(), 1u);
  for (const auto& m : s.metrics) {
    EXPECT_EQ(m.sd, 0.0) << m.name;
    if (m.count == 1 && m.name == "value_hat") {
      EXPECT_EQ(m.mean, s.per_replicate[0].value_hat);
    }
  }
  ASSERT_TRUE(s.per_replicate[0].accuracy);
  EXPECT_GE(*s.per_replicate[0].accuracy, 0.0);
  EXPECT_LE(*s.per_replicate[0].accuracy, 1.0);
  if (s.per_replicate[0].s2_rank) {
    EXPECT_GE(*s.per_replicate[0].s2_rank, 1.0);
  }
}

TEST(Benchmark, ReproducibleAndThreadIndependent) {
  BenchmarkRequest req;
  req.scenarios = {1, 5};
  req.replicates = 2;
  req.n_train = 100;
  req.n_valid = 150;
  req.sim.q = 3;
  req.grid = tiny_grid();
  req.seed = 77;
  const auto a = benchmark(req);
  req.threads = 3;
  const auto b = benchmark(req);
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t r = 0; r < 2; ++r) {
      EXPECT_EQ(a.scenarios[s].per_replicate[r].value_hat, b.scenarios[s].per_replicate[r].value_hat);
      EXPECT_EQ(a.scenarios[s].selected[r], b.scenarios[s].selected[r]);
    }
}

TEST(Summarize, SampleStandardDeviation) {
  const auto s = summarize("x", {1.0, std::nullopt, 3.0});
  EXPECT_EQ(s.count, 2);
  EXPECT_DOUBLE_EQ(s.mean, 2.0);
  EXPECT_DOUBLE_EQ(s.sd, std::sqrt(2.0));
  const auto e = summarize("y", {std::nullopt});
  EXPECT_EQ(e.count, 0);
}

TEST(PermutationTest, PValueBoundsAndSingleDraw) {
  const auto d = trial(1, 100, 12, 3);
  BoostConfig c;
  c.num_trees = 5;
  const auto one = permutation_test(d, c, HorizonPolicy{}, 1, 0.05, 3);
  EXPECT_TRUE(one.p_value == 0.5 || one.p_value == 1.0);
  const auto r = permutation_test(d, c, HorizonPolicy{}, 9, 0.05, 3);
  EXPECT_GE(r.p_value, 1.0 / 10.0);
  EXPECT_LE(r.p_value, 1.0);
  EXPECT_EQ(r.null_values.size(), 9u);
  EXPECT_EQ(r.null_values[0], one.null_values[0]);
  EXPECT_EQ(r.reject, r.observed_value > r.critical_value);
  EXPECT_EQ(permutation_test(d, c, HorizonPolicy{}, 9, 0.05, 3, 3).null_values, r.null_values);
  EXPECT_THROW(permutation_test(d, c, HorizonPolicy{}, 0, 0.05, 3), UsageError);
  EXPECT_THROW(permutation_test(d, c, HorizonPolicy{}, 5, 1.0, 3), UsageError);
}

TEST(PermutationTest, StrongSignalIsDetected) {
  const auto d = trial(1, 300, 13, 3);
  BoostConfig c;
  c.num_trees = 20;
  const auto r = permutation_test(d, c, HorizonPolicy{}, 19, 0.05, 5);
  EXPECT_EQ(r.p_value, 0.05);
  EXPECT_TRUE(r.reject);
}

TEST(ParallelFor, CoversEveryIndexAndRethrowsLowest) {
  std::vector<int> hit(100, 0);
  parallel_for(hit.size(), 4, [&](std::size_t i) { hit[i] += 1; });
  EXPECT_EQ(std::count(hit.begin(), hit.end(), 1), 100);
  try {
    parallel_for(50, 3, [](std::size_t i) {
      if (i == 7 || i == 31) throw std::runtime_error(std::to_string(i));
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "7");
  }
}

}  // namespace
}  // namespace rmstboost

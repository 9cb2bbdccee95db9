#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "rmstboost/boost.hpp"
#include "rmstboost/error.hpp"
#include "rmstboost/parallel.hpp"
#include "rmstboost/random.hpp"
#include "rmstboost/simulate.hpp"
#include "rmstboost/survival.hpp"
#include "rmstboost/value.hpp"

namespace rmstboost {

enum class MembershipMode { kHard, kSoft };

struct Metrics {
  // Per-patient value V/n on the evaluated data.
  double value_hat = 0.0;
  std::optional<double> accuracy;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> s1_rank;
  std::optional<double> s2_rank;
};

// Per-patient value of hard 0/1 memberships.
inline double hard_value(const Dataset& data, const std::vector<int>& membership,
                         const TimeHorizon& horizon) {
  std::vector<double> p(membership.begin(), membership.end());
  return value_hat(data, MembershipState::from_scores(p), horizon).value /
         static_cast<double>(data.size());
}

// Accuracy fields against the true labels. A rate whose class is absent is 0.
inline void fill_classification(Metrics& m, const std::vector<int>& predicted,
                                const std::vector<int>& truth) {
  detail::require(predicted.size() == truth.size(), "label length mismatch");
  std::size_t tp = 0, tn = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == 1) {
      ++pos;
      tp += predicted[i] == 1;
    } else {
      ++neg;
      tn += predicted[i] == 0;
    }
  }
  const auto n = static_cast<double>(truth.size());
  m.accuracy = n > 0 ? static_cast<double>(tp + tn) / n : 0.0;
  m.sensitivity = pos > 0 ? static_cast<double>(tp) / static_cast<double>(pos) : 0.0;
  m.specificity = neg > 0 ? static_cast<double>(tn) / static_cast<double>(neg) : 0.0;
}

inline Metrics evaluate(const BoostedModel& model, const Dataset& validation, double cutoff,
                        const TimeHorizon& horizon, MembershipMode mode = MembershipMode::kHard) {
  validation.validate();
  const auto scores = predict_scores(model, validation.covariates);
  const auto predicted = classify(scores, cutoff);
  Metrics m;
  if (mode == MembershipMode::kHard) {
    m.value_hat = hard_value(validation, predicted, horizon);
  } else {
    m.value_hat =
        value_hat(validation, scores, horizon).value / static_cast<double>(validation.size());
  }
  if (validation.true_membership) fill_classification(m, predicted, *validation.true_membership);
  return m;
}

struct CvGrid {
  std::vector<double> learning_rates{0.05, 0.1, 0.3};
  std::vector<int> max_depths{2, 3};
  std::vector<int> num_trees{50, 100, 200};
  int folds = 5;
  std::uint64_t seed = 0;
  // Remaining booster settings shared by every grid point.
  BoostConfig base;

  void validate() const {
    detail::require(!learning_rates.empty() && !max_depths.empty() && !num_trees.empty(),
                    "cross-validation grid must be nonempty");
    detail::require(folds >= 2, "cross-validation needs at least two folds");
    for (double eta : learning_rates)
      detail::require(eta > 0.0 && eta <= 1.0, "grid learning rates must lie in (0, 1]");
    for (int d : max_depths) detail::require(d >= 1, "grid depths must be positive");
    for (int k : num_trees) detail::require(k >= 1, "grid tree counts must be positive");
    base.validate();
  }
};

// Fold id per row: seeded shuffle, then contiguous blocks (earlier folds take
// the remainder).
inline std::vector<int> fold_assignment(std::size_t n, int folds, std::uint64_t seed) {
  detail::require(folds >= 2, "cross-validation needs at least two folds");
  detail::require(n >= static_cast<std::size_t>(folds), "more folds than rows");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  shuffle(perm, rng);
  std::vector<int> fold(n);
  const auto k = static_cast<std::size_t>(folds);
  std::size_t at = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t len = n / k + (f < n % k ? 1 : 0);
    for (std::size_t j = 0; j < len; ++j) fold[perm[at++]] = static_cast<int>(f);
  }
  return fold;
}

struct CvScore {
  BoostConfig config;
  double mean_value = 0.0;  // mean held-out per-patient value
  std::vector<double> fold_values;
};

struct CvResult {
  BoostConfig best;
  std::vector<CvScore> scores;
};

// Grid search maximizing the mean held-out hard-membership value. For each
// (learning rate, depth) one model with the largest tree count is fitted per
// fold and truncated for the smaller counts.
inline CvResult cross_validate(const Dataset& train, const CvGrid& grid,
                               const HorizonPolicy& horizon, int threads = 1,
                               double cutoff = 0.5) {
  grid.validate();
  train.validate();
  const auto fold = fold_assignment(train.size(), grid.folds, grid.seed);
  const auto folds = static_cast<std::size_t>(grid.folds);
  std::vector<Dataset> fit_sets(folds), held_sets(folds);
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> in, out;
    for (std::size_t i = 0; i < train.size(); ++i)
      (static_cast<std::size_t>(fold[i]) == f ? out : in).push_back(i);
    fit_sets[f] = train.select_rows(in);
    held_sets[f] = train.select_rows(out);
  }

  auto tree_counts = grid.num_trees;
  std::sort(tree_counts.begin(), tree_counts.end());
  tree_counts.erase(std::unique(tree_counts.begin(), tree_counts.end()), tree_counts.end());
  const int max_trees = tree_counts.back();

  struct Combo {
    double eta;
    int depth;
  };
  std::vector<Combo> combos;
  for (double eta : grid.learning_rates)
    for (int depth : grid.max_depths) combos.push_back({eta, depth});

  // values[(combo * folds + fold) * counts + count_index]
  std::vector<double> values(combos.size() * folds * tree_counts.size());
  parallel_for(combos.size() * folds, threads, [&](std::size_t task) {
    const auto& combo = combos[task / folds];
    const std::size_t f = task % folds;
    BoostConfig config = grid.base;
    config.learning_rate = combo.eta;
    config.max_depth = combo.depth;
    config.num_trees = max_trees;
    const auto model = boost_fit(fit_sets[f], config, horizon.resolve(fit_sets[f]));
    const auto held_horizon = horizon.resolve(held_sets[f]);
    for (std::size_t c = 0; c < tree_counts.size(); ++c) {
      const auto m = model.truncated(static_cast<std::size_t>(tree_counts[c]));
      const auto labels = classify(predict_scores(m, held_sets[f].covariates), cutoff);
      values[task * tree_counts.size() + c] = hard_value(held_sets[f], labels, held_horizon);
    }
  });

  CvResult result;
  for (std::size_t k = 0; k < combos.size(); ++k) {
    for (std::size_t c = 0; c < tree_counts.size(); ++c) {
      CvScore s;
      s.config = grid.base;
      s.config.learning_rate = combos[k].eta;
      s.config.max_depth = combos[k].depth;
      s.config.num_trees = tree_counts[c];
      double sum = 0.0;
      for (std::size_t f = 0; f < folds; ++f) {
        const double v = values[(k * folds + f) * tree_counts.size() + c];
        s.fold_values.push_back(v);
        sum += v;
      }
      s.mean_value = sum / static_cast<double>(folds);
      result.scores.push_back(std::move(s));
    }
  }
  // Best mean; ties go to fewer trees, then shallower, then smaller step.
  const auto key = [](const BoostConfig& c) {
    return std::make_tuple(c.num_trees, c.max_depth, c.learning_rate);
  };
  const CvScore* best = nullptr;
  for (const auto& s : result.scores) {
    if (!best || s.mean_value > best->mean_value ||
        (s.mean_value == best->mean_value && key(s.config) < key(best->config)))
      best = &s;
  }
  result.best = best->config;
  return result;
}

struct BenchmarkRequest {
  std::vector<int> scenarios{1};
  int setting = 1;
  int replicates = 10;
  std::size_t n_train = 500;
  std::size_t n_valid = 2000;
  CvGrid grid;
  std::uint64_t seed = 0;
  // Template for the remaining simulation parameters (q, rho, ...).
  SimConfig sim;
  double cutoff = 0.5;
  HorizonPolicy horizon;
  int threads = 1;
};

struct MetricSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  int count = 0;  // replicates where the metric is defined
};

struct ScenarioSummary {
  int scenario = 0;
  int setting = 0;
  int replicates = 0;
  std::vector<Metrics> per_replicate;
  std::vector<BoostConfig> selected;
  std::vector<MetricSummary> metrics;
};

struct BenchmarkReport {
  std::vector<ScenarioSummary> scenarios;
  double wall_seconds = 0.0;
};

inline MetricSummary summarize(std::string name, const std::vector<std::optional<double>>& xs) {
  MetricSummary s;
  s.name = std::move(name);
  double sum = 0.0;
  for (const auto& x : xs)
    if (x) {
      sum += *x;
      ++s.count;
    }
  if (s.count == 0) return s;
  s.mean = sum / s.count;
  if (s.count > 1) {
    double ss = 0.0;
    for (const auto& x : xs)
      if (x) ss += (*x - s.mean) * (*x - s.mean);
    s.sd = std::sqrt(ss / (s.count - 1));
  }
  return s;
}

// Seed for one replicate of one scenario/setting cell.
inline std::uint64_t replicate_seed(std::uint64_t seed, int scenario, int setting, int replicate) {
  return derive_seed(derive_seed(seed, static_cast<std::uint64_t>(scenario * 10 + setting)),
                     static_cast<std::uint64_t>(replicate));
}

struct ReplicateOutcome {
  Metrics metrics;
  BoostConfig selected;
};

// One benchmark replicate: simulate, tune, fit, validate.
inline ReplicateOutcome run_replicate(const BenchmarkRequest& req, int scenario, int replicate) {
  const auto rseed = replicate_seed(req.seed, scenario, req.setting, replicate);
  SimConfig sim = req.sim;
  sim.scenario = scenario;
  sim.setting = req.setting;
  sim.n = req.n_train;
  sim.seed = derive_seed(rseed, 0);
  const auto train = simulate(sim);
  sim.n = req.n_valid;
  sim.seed = derive_seed(rseed, 1);
  const auto valid = simulate(sim);

  CvGrid grid = req.grid;
  grid.seed = derive_seed(rseed, 2);
  const auto cv = cross_validate(train, grid, req.horizon, 1, req.cutoff);
  const auto model = boost_fit(train, cv.best, req.horizon.resolve(train));
  ReplicateOutcome out;
  out.selected = cv.best;
  out.metrics = evaluate(model, valid, req.cutoff, req.horizon.resolve(valid));
  if (!model.trees.empty()) {
    const auto vi = variable_importance(model);
    out.metrics.s1_rank = vi.rank_of("S1");
    if (scenario_uses_s2(scenario)) out.metrics.s2_rank = vi.rank_of("S2");
  }
  return out;
}

inline BenchmarkReport benchmark(const BenchmarkRequest& req) {
  detail::require(req.replicates >= 1, "replicates must be at least 1");
  detail::require(!req.scenarios.empty(), "at least one scenario is required");
  req.grid.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto reps = static_cast<std::size_t>(req.replicates);
  std::vector<ReplicateOutcome> outcomes(req.scenarios.size() * reps);
  parallel_for(outcomes.size(), req.threads, [&](std::size_t task) {
    outcomes[task] = run_replicate(req, req.scenarios[task / reps], static_cast<int>(task % reps));
  });

  BenchmarkReport report;
  for (std::size_t s = 0; s < req.scenarios.size(); ++s) {
    ScenarioSummary sum;
    sum.scenario = req.scenarios[s];
    sum.setting = req.setting;
    sum.replicates = req.replicates;
    std::vector<std::optional<double>> value, acc, sens, spec, r1, r2;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& o = outcomes[s * reps + r];
      sum.per_replicate.push_back(o.metrics);
      sum.selected.push_back(o.selected);
      value.push_back(o.metrics.value_hat);
      acc.push_back(o.metrics.accuracy);
      sens.push_back(o.metrics.sensitivity);
      spec.push_back(o.metrics.specificity);
      r1.push_back(o.metrics.s1_rank);
      r2.push_back(o.metrics.s2_rank);
    }
    sum.metrics = {summarize("value_hat", value), summarize("accuracy", acc),
                   summarize("sensitivity", sens), summarize("specificity", spec),
                   summarize("s1_rank", r1),        summarize("s2_rank", r2)};
    report.scenarios.push_back(std::move(sum));
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

struct PermutationResult {
  double observed_value = 0.0;
  std::vector<double> null_values;
  double p_value = 1.0;
  double critical_value = 0.0;  // (1 - alpha) empirical quantile of the null
  bool reject = false;
};

// Training-data per-patient hard-membership value of a freshly fitted model.
inline double maximized_value(const Dataset& data, const BoostConfig& config,
                              const TimeHorizon& horizon, double cutoff) {
  const auto model = boost_fit(data, config, horizon);
  return hard_value(data, classify(predict_scores(model, data.covariates), cutoff), horizon);
}

// Null draws permute covariate rows against the (time, event, arm) tuples.
inline PermutationResult permutation_test(const Dataset& data, const BoostConfig& config,
                                          const HorizonPolicy& horizon, int permutations,
                                          double alpha, std::uint64_t seed, int threads = 1,
                                          double cutoff = 0.5) {
  detail::require(permutations >= 1, "permutation count must be at least 1");
  detail::require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
  data.validate();
  const auto t_star = horizon.resolve(data);
  PermutationResult res;
  res.observed_value = maximized_value(data, config, t_star, cutoff);
  res.null_values.resize(static_cast<std::size_t>(permutations));
  parallel_for(res.null_values.size(), threads, [&](std::size_t b) {
    std::vector<std::size_t> perm(data.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(derive_seed(seed, b));
    shuffle(perm, rng);
    Dataset shuffled;
    shuffled.observations = data.observations;
    shuffled.feature_names = data.feature_names;
    shuffled.covariates = data.covariates.select_rows(perm);
    res.null_values[b] = maximized_value(shuffled, config, t_star, cutoff);
  });
  std::size_t at_least = 0;
  for (double v : res.null_values) at_least += v >= res.observed_value;
  res.p_value = static_cast<double>(1 + at_least) / static_cast<double>(permutations + 1);
  auto sorted = res.null_values;
  std::sort(sorted.begin(), sorted.end());
  const auto k = static_cast<std::size_t>(
      std::ceil((1.0 - alpha) * static_cast<double>(permutations) - 1e-12));
  res.critical_value = sorted[std::clamp<std::size_t>(k, 1, sorted.size()) - 1];
  res.reject = res.observed_value > res.critical_value;
  return res;
}

}  // namespace rmstboost

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "rmstboost/error.hpp"
#include "rmstboost/survival.hpp"
#include "rmstboost/tree.hpp"
#include "rmstboost/value.hpp"

namespace rmstboost {

struct BoostedModel {
  std::vector<Tree> trees;
  double base_logit = 0.0;
  BoostConfig config;
  std::vector<std::string> feature_names;
  TimeHorizon horizon{1.0};
  // Training loss per iteration (-V, or -V/n with normalize_loss); entry 0
  // is before the first tree.
  std::vector<double> loss_trace;

  std::size_t num_features() const noexcept { return feature_names.size(); }

  // Same model restricted to its first k trees.
  BoostedModel truncated(std::size_t k) const {
    BoostedModel out = *this;
    out.trees.resize(std::min(k, trees.size()));
    out.loss_trace.resize(std::min(out.trees.size() + 1, loss_trace.size()));
    return out;
  }

  friend bool operator==(const BoostedModel&, const BoostedModel&) = default;
};

// Logit of one covariate row; shrinkage is applied tree by tree in fit order.
inline double predict_logit(const BoostedModel& model, std::span<const double> x) noexcept {
  double f = model.base_logit;
  for (const auto& tree : model.trees) f += model.config.learning_rate * tree.predict(x);
  return f;
}

inline MembershipState predict_scores(const BoostedModel& model, const Matrix& covariates) {
  detail::require(covariates.cols() == model.num_features(),
                  "covariate column count does not match the model");
  std::vector<double> logits(covariates.rows());
  for (std::size_t i = 0; i < covariates.rows(); ++i)
    logits[i] = predict_logit(model, covariates.row(i));
  return MembershipState::from_logits(std::move(logits));
}

// Gradient boosting of the membership logits against -value_hat. If
// final_logits is given it receives the training logits after the last tree.
inline BoostedModel boost_fit(const Dataset& data, const BoostConfig& config,
                              const TimeHorizon& horizon,
                              std::vector<double>* final_logits = nullptr) {
  config.validate();
  data.validate();
  BoostedModel model;
  model.config = config;
  model.feature_names = data.feature_names;
  model.horizon = horizon;

  const std::size_t n = data.size();
  const double scale = config.normalize_loss ? 1.0 / static_cast<double>(n) : 1.0;
  std::vector<double> logits(n, model.base_logit);
  auto state = MembershipState::from_logits(logits);
  model.loss_trace.push_back(-scale * value_hat(data, state, horizon).value);
  if (config.num_trees > 0) {
    const SortedColumns sorted(data.covariates);
    model.trees.reserve(static_cast<std::size_t>(config.num_trees));
    for (int k = 0; k < config.num_trees; ++k) {
      auto grad = value_gradient(data, state, horizon);
      if (scale != 1.0)
        for (auto& g : grad.values) g *= scale;
      auto tree = fit_tree(data.covariates, grad.values, config, sorted);
      for (std::size_t i = 0; i < n; ++i)
        logits[i] += config.learning_rate * tree.predict(data.covariates.row(i));
      model.trees.push_back(std::move(tree));
      state = MembershipState::from_logits(logits);
      model.loss_trace.push_back(-scale * value_hat(data, state, horizon).value);
    }
  }
  if (final_logits) *final_logits = std::move(logits);
  return model;
}

inline std::vector<int> classify(const MembershipState& state, double cutoff) {
  detail::require(cutoff > 0.0 && cutoff < 1.0, "cutoff must lie in the open interval (0, 1)");
  std::vector<int> out;
  out.reserve(state.size());
  for (double p : state.scores()) out.push_back(p > cutoff ? 1 : 0);
  return out;
}

struct VariableImportance {
  std::vector<std::string> feature_names;
  std::vector<double> total_gain;
  // 1 = most important. Features without gain share the median of the
  // remaining ranks, offset by the number of features with gain.
  std::vector<double> rank;

  double rank_of(const std::string& name) const {
    const auto it = std::find(feature_names.begin(), feature_names.end(), name);
    detail::require(it != feature_names.end(), "unknown feature: " + name);
    return rank[static_cast<std::size_t>(it - feature_names.begin())];
  }
};

inline VariableImportance variable_importance(const BoostedModel& model) {
  detail::require(!model.trees.empty(), "variable importance needs at least one tree");
  const std::size_t q = model.num_features();
  VariableImportance vi;
  vi.feature_names = model.feature_names;
  vi.total_gain.assign(q, 0.0);
  for (const auto& tree : model.trees)
    for (const auto& node : tree.nodes)
      if (!node.is_leaf()) vi.total_gain[static_cast<std::size_t>(node.split_feature)] += node.gain;

  std::vector<std::size_t> used, unused;
  for (std::size_t f = 0; f < q; ++f) (vi.total_gain[f] > 0.0 ? used : unused).push_back(f);
  std::stable_sort(used.begin(), used.end(), [&](std::size_t a, std::size_t b) {
    return vi.total_gain[a] > vi.total_gain[b];
  });
  vi.rank.assign(q, 0.0);
  for (std::size_t r = 0; r < used.size(); ++r) vi.rank[used[r]] = static_cast<double>(r + 1);
  const double tail_rank =
      static_cast<double>(used.size()) + (static_cast<double>(unused.size()) + 1.0) / 2.0;
  for (auto f : unused) vi.rank[f] = tail_rank;
  return vi;
}

}  // namespace rmstboost

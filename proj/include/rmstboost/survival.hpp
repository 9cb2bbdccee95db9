#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rmstboost/error.hpp"
#include "rmstboost/matrix.hpp"

namespace rmstboost {

struct SurvivalObservation {
  double time_months = 0.0;
  int event = 0;  // 1 = event observed, 0 = censored
  int arm = 0;    // 1 = experimental, 0 = control

  friend bool operator==(const SurvivalObservation&, const SurvivalObservation&) = default;
};

struct Dataset {
  std::vector<SurvivalObservation> observations;
  Matrix covariates;  // n x q
  std::vector<std::string> feature_names;
  std::optional<std::vector<int>> true_membership;

  std::size_t size() const noexcept { return observations.size(); }
  std::size_t num_features() const noexcept { return covariates.cols(); }

  // Throws DataError when an invariant does not hold.
  void validate() const {
    using detail::require_data;
    require_data(covariates.rows() == observations.size(),
                 "covariate row count does not match observation count");
    require_data(feature_names.size() == covariates.cols(),
                 "feature name count does not match covariate column count");
    bool has0 = false, has1 = false;
    for (const auto& o : observations) {
      require_data(std::isfinite(o.time_months) && o.time_months > 0.0,
                   "survival times must be positive and finite");
      require_data(o.event == 0 || o.event == 1, "event indicator must be 0 or 1");
      require_data(o.arm == 0 || o.arm == 1, "arm must be 0 or 1");
      (o.arm == 1 ? has1 : has0) = true;
    }
    require_data(has0 && has1, "both treatment arms must be present");
    if (true_membership) {
      require_data(true_membership->size() == observations.size(),
                   "true membership length does not match observation count");
      for (int g : *true_membership)
        require_data(g == 0 || g == 1, "true membership labels must be 0 or 1");
    }
  }

  Dataset select_rows(std::span<const std::size_t> idx) const {
    Dataset out;
    out.observations.reserve(idx.size());
    for (auto i : idx) out.observations.push_back(observations[i]);
    out.covariates = covariates.select_rows(idx);
    out.feature_names = feature_names;
    if (true_membership) {
      std::vector<int> g;
      g.reserve(idx.size());
      for (auto i : idx) g.push_back((*true_membership)[i]);
      out.true_membership = std::move(g);
    }
    return out;
  }
};

class TimeHorizon {
 public:
  explicit TimeHorizon(double t_star) : t_star_(t_star) {
    detail::require(std::isfinite(t_star) && t_star > 0.0,
                    "time horizon must be positive and finite");
  }
  double t_star() const noexcept { return t_star_; }
  friend bool operator==(const TimeHorizon&, const TimeHorizon&) = default;

 private:
  double t_star_;
};

// Minimum over arms of the largest observed time.
inline TimeHorizon default_horizon(const Dataset& data) {
  double arm_max[2] = {0.0, 0.0};
  for (const auto& o : data.observations) {
    double& m = arm_max[o.arm == 1 ? 1 : 0];
    m = std::max(m, o.time_months);
  }
  const double max0 = arm_max[0], max1 = arm_max[1];
  detail::require_data(max0 > 0.0 && max1 > 0.0, "both treatment arms must be present");
  return TimeHorizon(std::min(max0, max1));
}

// Either a fixed t* or the per-dataset default.
struct HorizonPolicy {
  std::optional<double> fixed;

  TimeHorizon resolve(const Dataset& data) const {
    return fixed ? TimeHorizon(*fixed) : default_horizon(data);
  }
};

// Right-continuous step function; value 1 before the first jump.
struct StepSurvivalCurve {
  std::vector<double> jump_times;
  std::vector<double> survival_values;

  double at(double t) const noexcept {
    const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    if (it == jump_times.begin()) return 1.0;
    return survival_values[static_cast<std::size_t>(it - jump_times.begin()) - 1];
  }
};

namespace detail {

// Weighted event mass and risk-set mass at one distinct event time.
struct HazardTerm {
  double time;
  double events;
  double at_risk;
};

inline void check_curve_inputs(const Dataset& data, std::span<const double> weights, int arm) {
  require(weights.size() == data.size(), "weight vector length does not match dataset size");
  require(arm == 0 || arm == 1, "arm must be 0 or 1");
  bool present = false;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    require(weights[i] >= 0.0 && weights[i] <= 1.0, "weights must lie in [0, 1]");
    present = present || data.observations[i].arm == arm;
  }
  require_data(present, "requested arm has no observations");
}

// Indices of the arm's patients sorted by increasing time (stable on ties).
inline std::vector<std::size_t> arm_order(const Dataset& data, int arm) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.observations[i].arm == arm) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return data.observations[a].time_months < data.observations[b].time_months;
  });
  return idx;
}

// Hazard terms for every distinct event time with positive risk mass and
// (unless keep_zero_mass) positive weighted event mass. Sums run in a fixed
// order.
inline std::vector<HazardTerm> hazard_terms(const Dataset& data, std::span<const double> weights,
                                            int arm, bool keep_zero_mass = false) {
  const auto idx = arm_order(data, arm);
  std::vector<HazardTerm> terms;
  // Walk from the longest time down, accumulating risk-set mass.
  double at_risk = 0.0;
  std::size_t end = idx.size();
  while (end > 0) {
    const double t = data.observations[idx[end - 1]].time_months;
    std::size_t begin = end;
    double events = 0.0;
    bool any_event = false;
    while (begin > 0 && data.observations[idx[begin - 1]].time_months == t) {
      --begin;
      const auto i = idx[begin];
      at_risk += weights[i];
      if (data.observations[i].event == 1) {
        events += weights[i];
        any_event = true;
      }
    }
    if (any_event && (events > 0.0 || keep_zero_mass) && at_risk > 0.0) terms.push_back({t, events, at_risk});
    end = begin;
  }
  std::reverse(terms.begin(), terms.end());
  return terms;
}

}  // namespace detail

// Weighted Nelson-Aalen survival exp(-H(t)) for one arm.
inline StepSurvivalCurve weighted_survival_curve(const Dataset& data,
                                                 std::span<const double> weights, int arm) {
  detail::check_curve_inputs(data, weights, arm);
  StepSurvivalCurve curve;
  double cumulative = 0.0;
  for (const auto& term : detail::hazard_terms(data, weights, arm)) {
    cumulative += term.events / term.at_risk;
    curve.jump_times.push_back(term.time);
    curve.survival_values.push_back(std::exp(-cumulative));
  }
  return curve;
}

// Weighted Kaplan-Meier product-limit estimate for one arm.
inline StepSurvivalCurve km_curve(const Dataset& data, std::span<const double> weights, int arm) {
  detail::check_curve_inputs(data, weights, arm);
  StepSurvivalCurve curve;
  double surv = 1.0;
  for (const auto& term : detail::hazard_terms(data, weights, arm)) {
    surv *= std::max(0.0, 1.0 - term.events / term.at_risk);
    curve.jump_times.push_back(term.time);
    curve.survival_values.push_back(surv);
  }
  return curve;
}

// Exact area under the step curve on [0, t*].
inline double rmst(const StepSurvivalCurve& curve, const TimeHorizon& horizon) {
  const double t_star = horizon.t_star();
  double area = 0.0;
  double prev_time = 0.0;
  double prev_surv = 1.0;
  for (std::size_t k = 0; k < curve.jump_times.size(); ++k) {
    const double t = curve.jump_times[k];
    if (t >= t_star) break;
    area += prev_surv * (t - prev_time);
    prev_time = t;
    prev_surv = curve.survival_values[k];
  }
  return area + prev_surv * (t_star - prev_time);
}

}  // namespace rmstboost

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "rmstboost/error.hpp"
#include "rmstboost/survival.hpp"

namespace rmstboost {

inline constexpr double kScoreClip = 1e-6;
// Soft subgroup sizes below this contribute nothing to the value.
inline constexpr double kMinSoftSize = 1e-9;

inline double sigmoid(double f) noexcept {
  if (f >= 0.0) return 1.0 / (1.0 + std::exp(-f));
  const double e = std::exp(f);
  return e / (1.0 + e);
}

inline double clip_score(double p) noexcept {
  return std::clamp(p, kScoreClip, 1.0 - kScoreClip);
}

// Per-patient membership logits F and their clipped sigmoid scores p.
class MembershipState {
 public:
  MembershipState() = default;

  static MembershipState from_logits(std::vector<double> logits) {
    MembershipState s;
    s.scores_.reserve(logits.size());
    for (double f : logits) {
      detail::require(std::isfinite(f), "membership logits must be finite");
      s.scores_.push_back(clip_score(sigmoid(f)));
    }
    s.logits_ = std::move(logits);
    return s;
  }

  // Scores are kept as given, so hard 0/1 memberships stay exact; the
  // logits are those of the clipped scores.
  static MembershipState from_scores(std::span<const double> scores) {
    std::vector<double> logits;
    logits.reserve(scores.size());
    for (double p : scores) {
      detail::require(p >= 0.0 && p <= 1.0, "membership scores must lie in [0, 1]");
      const double c = clip_score(p);
      logits.push_back(std::log(c / (1.0 - c)));
    }
    auto s = from_logits(std::move(logits));
    s.scores_.assign(scores.begin(), scores.end());
    return s;
  }

  static MembershipState constant(std::size_t n, double logit) {
    return from_logits(std::vector<double>(n, logit));
  }

  std::size_t size() const noexcept { return logits_.size(); }
  const std::vector<double>& logits() const noexcept { return logits_; }
  const std::vector<double>& scores() const noexcept { return scores_; }

  // d p_i / d F_i of the clipped map: zero where the clip is active.
  double score_derivative(std::size_t i) const noexcept {
    const double raw = sigmoid(logits_[i]);
    if (raw < kScoreClip || raw > 1.0 - kScoreClip) return 0.0;
    return raw * (1.0 - raw);
  }

 private:
  std::vector<double> logits_;
  std::vector<double> scores_;
};

struct ValueReport {
  double value = 0.0;  // patient-months
  double rmst_arm1_perform = 0.0;
  double rmst_arm0_perform = 0.0;
  double rmst_arm1_nonperform = 0.0;
  double rmst_arm0_nonperform = 0.0;
  double soft_size_perform = 0.0;
  double soft_size_nonperform = 0.0;
  TimeHorizon horizon{1.0};

  double per_patient() const noexcept {
    const double n = soft_size_perform + soft_size_nonperform;
    return n > 0.0 ? value / n : 0.0;
  }
};

struct GradientVector {
  std::vector<double> values;
};

namespace detail {

inline void check_value_inputs(const Dataset& data, const MembershipState& state) {
  require(state.size() == data.size(), "membership state length does not match dataset size");
  data.validate();
}

struct CellWeights {
  std::vector<double> perform;     // p
  std::vector<double> nonperform;  // 1 - p
};

inline CellWeights cell_weights(const MembershipState& state) {
  CellWeights w;
  w.perform = state.scores();
  w.nonperform.reserve(state.size());
  for (double p : state.scores()) w.nonperform.push_back(1.0 - p);
  return w;
}

// Fixed-order sum.
inline double ordered_sum(std::span<const double> v) noexcept {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

// Adds scale * dRMST/dw_i of the arm's weighted Nelson-Aalen curve into out[i]
// for every patient i in the arm. Returns the RMST itself.
//
// With hazard increments D_k/R_k and tail areas B_k = int_{t_k}^{t*} S(t) dt,
//   dRMST/dw_i = -delta_i B_{k(i)} / R_{k(i)} + sum_{t_k <= X_i} B_k D_k / R_k^2.
inline double add_rmst_weight_gradient(const Dataset& data, std::span<const double> weights,
                                       int arm, const TimeHorizon& horizon, double scale,
                                       std::span<double> out) {
  const double t_star = horizon.t_star();
  auto terms = hazard_terms(data, weights, arm, /*keep_zero_mass=*/true);
  std::erase_if(terms, [&](const HazardTerm& t) { return t.time >= t_star; });
  const std::size_t m = terms.size();

  // Survival after each jump and the length it is held for inside [0, t*].
  std::vector<double> held_area(m);
  double cumulative = 0.0;
  double area = m == 0 ? t_star : terms[0].time;
  for (std::size_t k = 0; k < m; ++k) {
    cumulative += terms[k].events / terms[k].at_risk;
    const double next = k + 1 < m ? terms[k + 1].time : t_star;
    held_area[k] = std::exp(-cumulative) * (next - terms[k].time);
    area += held_area[k];
  }
  std::vector<double> tail(m);
  double acc = 0.0;
  for (std::size_t k = m; k-- > 0;) {
    acc += held_area[k];
    tail[k] = acc;
  }
  // Prefix sums of B_k D_k / R_k^2 over jump times.
  std::vector<double> prefix(m);
  acc = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const auto& t = terms[k];
    acc += tail[k] * t.events / (t.at_risk * t.at_risk);
    prefix[k] = acc;
  }

  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& o = data.observations[i];
    if (o.arm != arm) continue;
    const auto upper = std::upper_bound(terms.begin(), terms.end(), o.time_months,
                                        [](double x, const HazardTerm& t) { return x < t.time; });
    const auto count = static_cast<std::size_t>(upper - terms.begin());
    double d = count > 0 ? prefix[count - 1] : 0.0;
    if (o.event == 1 && count > 0 && terms[count - 1].time == o.time_months)
      d -= tail[count - 1] / terms[count - 1].at_risk;
    out[i] += scale * d;
  }
  return area;
}

}  // namespace detail

// Subgroup-by-treatment interaction value with soft memberships.
inline ValueReport value_hat(const Dataset& data, const MembershipState& state,
                             const TimeHorizon& horizon) {
  detail::check_value_inputs(data, state);
  const auto w = detail::cell_weights(state);
  ValueReport r;
  r.horizon = horizon;
  r.soft_size_perform = detail::ordered_sum(w.perform);
  r.soft_size_nonperform = detail::ordered_sum(w.nonperform);
  r.rmst_arm1_perform = rmst(weighted_survival_curve(data, w.perform, 1), horizon);
  r.rmst_arm0_perform = rmst(weighted_survival_curve(data, w.perform, 0), horizon);
  r.rmst_arm1_nonperform = rmst(weighted_survival_curve(data, w.nonperform, 1), horizon);
  r.rmst_arm0_nonperform = rmst(weighted_survival_curve(data, w.nonperform, 0), horizon);
  double value = 0.0;
  if (r.soft_size_perform >= kMinSoftSize)
    value += r.soft_size_perform * (r.rmst_arm1_perform - r.rmst_arm0_perform);
  if (r.soft_size_nonperform >= kMinSoftSize)
    value -= r.soft_size_nonperform * (r.rmst_arm1_nonperform - r.rmst_arm0_nonperform);
  r.value = value;
  return r;
}

// Alternative single-contrast value: sum p * RMST(arm 1, p) + sum (1-p) * RMST(arm 0, 1-p).
inline double value_itr_hat(const Dataset& data, const MembershipState& state,
                            const TimeHorizon& horizon) {
  const auto r = value_hat(data, state, horizon);
  double v = 0.0;
  if (r.soft_size_perform >= kMinSoftSize) v += r.soft_size_perform * r.rmst_arm1_perform;
  if (r.soft_size_nonperform >= kMinSoftSize) v += r.soft_size_nonperform * r.rmst_arm0_nonperform;
  return v;
}

// Analytic gradient of the loss -value_hat with respect to the logits.
inline GradientVector value_gradient(const Dataset& data, const MembershipState& state,
                                     const TimeHorizon& horizon) {
  detail::check_value_inputs(data, state);
  const std::size_t n = data.size();
  const auto w = detail::cell_weights(state);
  const double size_p = detail::ordered_sum(w.perform);
  const double size_q = detail::ordered_sum(w.nonperform);

  // dV/dp accumulated cell by cell. Weights 1-p flip the sign of dw/dp.
  std::vector<double> dv_dp(n, 0.0);
  if (size_p >= kMinSoftSize) {
    const double r11 = detail::add_rmst_weight_gradient(data, w.perform, 1, horizon, size_p, dv_dp);
    const double r01 =
        detail::add_rmst_weight_gradient(data, w.perform, 0, horizon, -size_p, dv_dp);
    for (auto& d : dv_dp) d += r11 - r01;
  }
  if (size_q >= kMinSoftSize) {
    std::vector<double> dq(n, 0.0);
    const double r10 = detail::add_rmst_weight_gradient(data, w.nonperform, 1, horizon, size_q, dq);
    const double r00 =
        detail::add_rmst_weight_gradient(data, w.nonperform, 0, horizon, -size_q, dq);
    for (std::size_t i = 0; i < n; ++i) dv_dp[i] += dq[i] + (r10 - r00);
  }

  GradientVector g;
  g.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) g.values[i] = -dv_dp[i] * state.score_derivative(i);
  for (double x : g.values)
    if (!std::isfinite(x)) throw NumericalError("non-finite value gradient");
  return g;
}

// Central finite differences of -value_hat in each logit; a test oracle.
inline GradientVector finite_diff_gradient(const Dataset& data, const MembershipState& state,
                                           const TimeHorizon& horizon, double h) {
  detail::require(std::isfinite(h) && h > 0.0, "finite-difference step must be positive");
  detail::check_value_inputs(data, state);
  GradientVector g;
  g.values.resize(data.size());
  std::vector<double> logits = state.logits();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double f = logits[i];
    logits[i] = f + h;
    const double up = -value_hat(data, MembershipState::from_logits(logits), horizon).value;
    logits[i] = f - h;
    const double down = -value_hat(data, MembershipState::from_logits(logits), horizon).value;
    logits[i] = f;
    g.values[i] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace rmstboost

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "rmstboost/error.hpp"
#include "rmstboost/matrix.hpp"
#include "rmstboost/random.hpp"
#include "rmstboost/survival.hpp"

namespace rmstboost {

// Two-arm trial simulation: six subgroup patterns, with (setting 2) or
// without (setting 1) prognostic covariates. Times are in months.
struct SimConfig {
  int scenario = 1;
  int setting = 1;
  std::size_t n = 500;
  std::size_t q = 50;
  double rho = 1.0 / 3.0;
  double beta0 = std::numbers::sqrt2 * std::numbers::sqrt3;  // sqrt(6)
  double sigma0 = 0.4;
  // Empty means the setting default: zeros (setting 1) or four leading 0.4s.
  std::vector<double> beta_z;
  double enrollment_months = 12.0;
  double followup_months = 18.0;
  double yearly_dropout = 0.10;
  std::uint64_t seed = 0;
  // Replaces the treatment term by zero: a no-interaction null.
  bool no_interaction = false;

  void validate() const {
    using detail::require;
    require(scenario >= 1 && scenario <= 6, "scenario must be in 1..6");
    require(setting == 1 || setting == 2, "setting must be 1 or 2");
    require(n >= 1, "n must be positive");
    require(q >= 1, "q must be positive");
    require(rho >= 0.0 && rho < 1.0, "rho must lie in [0, 1)");
    require(std::isfinite(beta0), "beta0 must be finite");
    require(std::isfinite(sigma0) && sigma0 > 0.0, "sigma0 must be positive");
    require(beta_z.empty() || beta_z.size() == q, "beta_z length must equal q");
    require(std::isfinite(enrollment_months) && enrollment_months > 0.0,
            "enrollment_months must be positive");
    require(std::isfinite(followup_months) && followup_months > 0.0,
            "followup_months must be positive");
    require(yearly_dropout >= 0.0 && yearly_dropout < 1.0, "yearly_dropout must lie in [0, 1)");
  }

  std::vector<double> effective_beta_z() const {
    if (!beta_z.empty()) return beta_z;
    std::vector<double> b(q, 0.0);
    if (setting == 2)
      for (std::size_t j = 0; j < std::min<std::size_t>(4, q); ++j) b[j] = 0.4;
    return b;
  }

  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

inline bool scenario_uses_s2(int scenario) noexcept {
  return scenario == 2 || scenario == 4 || scenario == 6;
}

// Coefficient of the treatment indicator in the scenario's log-time model.
inline double treatment_term(int scenario, double s1, double s2) {
  const auto ind = [](bool b) { return b ? 1.0 : 0.0; };
  switch (scenario) {
    case 1:
      return s1;
    case 2:
      return s1 - s2;
    case 3: {
      const double bump = std::exp(-s1 * s1);
      const bool inner = -0.67 <= s1 && s1 < 0.67;
      return 2.0 * (ind(inner) * (bump - 0.4) + ind(!inner) * (bump - 0.8));
    }
    case 4:
      return 2.0 * ind(-1.07 <= s1 && s1 < 1.07 && -1.07 <= s2 && s2 < 1.07) - 1.0;
    case 5:
      return 2.0 * ind(s1 >= 0.67 || (-0.67 <= s1 && s1 < 0.0)) - 1.0;
    case 6:
      return 2.0 * ind((s1 >= 0.0 && s2 >= -0.67) || (s1 < 0.0 && s2 < -0.67)) - 1.0;
    default:
      throw UsageError("scenario must be in 1..6");
  }
}

// 1 iff the experimental arm helps at (s1, s2).
inline int true_membership(int scenario, double s1, double s2 = 0.0) {
  switch (scenario) {
    case 1:
      return s1 > 0.0;
    case 2:
      return s1 > s2;
    case 3: {
      const double bump = std::exp(-s1 * s1);
      return std::abs(s1) < 0.67 ? bump > 0.4 : bump > 0.8;
    }
    case 4:
      return -1.07 <= s1 && s1 < 1.07 && -1.07 <= s2 && s2 < 1.07;
    case 5:
      return s1 >= 0.67 || (-0.67 <= s1 && s1 < 0.0);
    case 6:
      return (s1 >= 0.0 && s2 >= -0.67) || (s1 < 0.0 && s2 < -0.67);
    default:
      throw UsageError("scenario must be in 1..6");
  }
}

namespace detail {

// Lower Cholesky factor of (1 - rho) I + rho 11'.
inline Matrix compound_symmetric_cholesky(std::size_t dim, double rho) {
  Matrix sigma(dim, dim, rho);
  for (std::size_t i = 0; i < dim; ++i) sigma(i, i) = 1.0;
  Matrix l(dim, dim, 0.0);
  for (std::size_t j = 0; j < dim; ++j) {
    double diag = sigma(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0)) throw NumericalError("covariance matrix is not positive definite");
    l(j, j) = std::sqrt(diag);
    for (std::size_t i = j + 1; i < dim; ++i) {
      double s = sigma(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

inline void draw_correlated_row(Rng& rng, const Matrix& chol, std::span<double> out,
                                std::vector<double>& scratch) {
  const std::size_t dim = chol.rows();
  scratch.resize(dim);
  for (auto& z : scratch) z = rng.normal();
  for (std::size_t i = 0; i < dim; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k <= i; ++k) s += chol(i, k) * scratch[k];
    out[i] = s;
  }
}

}  // namespace detail

// Rows i.i.d. N(0, (1 - rho) I + rho 11'); row i uses its own stream.
inline Matrix sample_covariates(std::size_t n, std::size_t dim, double rho, std::uint64_t seed) {
  detail::require(dim >= 1, "dimension must be positive");
  detail::require(rho >= 0.0 && rho < 1.0, "rho must lie in [0, 1)");
  const auto chol = detail::compound_symmetric_cholesky(dim, rho);
  Matrix x(n, dim);
  std::vector<double> scratch;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    detail::draw_correlated_row(rng, chol, x.row(i), scratch);
  }
  return x;
}

struct SimulatedTrial {
  Dataset data;
  std::vector<double> event_times;   // latent T before censoring
  std::vector<double> censor_times;  // C = min(administrative, dropout)
};

inline SimulatedTrial simulate_trial(const SimConfig& config) {
  config.validate();
  const bool has_s2 = scenario_uses_s2(config.scenario);
  const std::size_t lead = has_s2 ? 2 : 1;
  const std::size_t dim = config.q + lead;
  const auto beta = config.effective_beta_z();
  const auto chol = detail::compound_symmetric_cholesky(dim, config.rho);
  const double dropout_rate = -std::log(1.0 - config.yearly_dropout) / 12.0;
  const double study_end = config.enrollment_months + config.followup_months;

  SimulatedTrial sim;
  auto& data = sim.data;
  data.covariates = Matrix(config.n, dim);
  data.feature_names.push_back("S1");
  if (has_s2) data.feature_names.push_back("S2");
  for (std::size_t j = 1; j <= config.q; ++j) data.feature_names.push_back("Z" + std::to_string(j));
  data.observations.resize(config.n);
  std::vector<int> truth(config.n);
  sim.event_times.resize(config.n);
  sim.censor_times.resize(config.n);

  std::vector<double> scratch;
  for (std::size_t i = 0; i < config.n; ++i) {
    Rng rng(derive_seed(config.seed, i));
    auto row = data.covariates.row(i);
    detail::draw_correlated_row(rng, chol, row, scratch);
    const double s1 = row[0];
    const double s2 = has_s2 ? row[1] : 0.0;
    const int arm = rng.bernoulli_half() ? 1 : 0;
    const double eps = rng.normal();
    const double enroll = config.enrollment_months * rng.uniform();
    const double dropout = dropout_rate > 0.0 ? rng.exponential(dropout_rate)
                                              : std::numeric_limits<double>::infinity();

    double linear = 0.0, quadratic = 0.0;
    for (std::size_t j = 0; j < config.q; ++j) {
      const double z = row[lead + j];
      linear += beta[j] * z;
      quadratic += beta[j] * z * z;
    }
    double prognostic = 0.0;
    switch (config.scenario) {
      case 4:
        prognostic = -linear * linear;
        break;
      case 5:
      case 6:
        prognostic = -quadratic;
        break;
      default:
        prognostic = linear;
    }
    const double effect =
        config.no_interaction ? 0.0 : treatment_term(config.scenario, s1, s2);
    const double t = std::exp(config.beta0 + arm * effect + prognostic + config.sigma0 * eps);
    const double c = std::min(study_end - enroll, dropout);

    data.observations[i] = {std::min(t, c), t <= c ? 1 : 0, arm};
    truth[i] = true_membership(config.scenario, s1, s2);
    sim.event_times[i] = t;
    sim.censor_times[i] = c;
  }
  data.true_membership = std::move(truth);
  return sim;
}

inline Dataset simulate(const SimConfig& config) { return simulate_trial(config).data; }

}  // namespace rmstboost

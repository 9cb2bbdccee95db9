#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rmstboost/boost.hpp"
#include "rmstboost/error.hpp"
#include "rmstboost/evaluate.hpp"
#include "rmstboost/random.hpp"
#include "rmstboost/simulate.hpp"
#include "rmstboost/survival.hpp"

namespace rmstboost {

using json = nlohmann::json;

// Shortest text that reads back to the same double (17 significant digits).
inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double parse_real(std::string_view s, std::size_t line_no, std::string_view column) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v))
    throw DataError("line " + std::to_string(line_no) + ": column '" + std::string(column) +
                    "' is not a finite number: '" + std::string(s) + "'");
  return v;
}

inline int parse_binary(std::string_view s, std::size_t line_no, std::string_view column) {
  const double v = parse_real(s, line_no, column);
  if (v != 0.0 && v != 1.0)
    throw DataError("line " + std::to_string(line_no) + ": column '" + std::string(column) +
                    "' must be 0 or 1");
  return static_cast<int>(v);
}

}  // namespace detail

// Header `time,event,arm,<features...>[,true_group]`.
inline Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw DataError("dataset CSV is empty");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 3 || header[0] != "time" || header[1] != "event" || header[2] != "arm")
    throw DataError("dataset CSV header must start with time,event,arm");
  const bool has_truth = header.back() == "true_group";
  const std::size_t feature_end = header.size() - (has_truth ? 1 : 0);

  Dataset data;
  std::set<std::string, std::less<>> seen;
  for (std::size_t c = 3; c < feature_end; ++c) {
    const std::string name(header[c]);
    if (name.empty()) throw DataError("empty column name in dataset CSV header");
    if (name == "time" || name == "event" || name == "arm" || name == "true_group")
      throw DataError("unexpected column '" + name + "' in dataset CSV header");
    if (!seen.insert(name).second) throw DataError("duplicate column '" + name + "'");
    data.feature_names.push_back(name);
  }
  const std::size_t q = data.feature_names.size();

  std::vector<double> values;
  std::vector<int> truth;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size())
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    SurvivalObservation o;
    o.time_months = detail::parse_real(fields[0], line_no, "time");
    if (!(o.time_months > 0.0))
      throw DataError("line " + std::to_string(line_no) + ": time must be positive");
    o.event = detail::parse_binary(fields[1], line_no, "event");
    o.arm = detail::parse_binary(fields[2], line_no, "arm");
    data.observations.push_back(o);
    for (std::size_t c = 3; c < feature_end; ++c)
      values.push_back(detail::parse_real(fields[c], line_no, header[c]));
    if (has_truth) truth.push_back(detail::parse_binary(fields.back(), line_no, "true_group"));
  }
  data.covariates = Matrix(data.observations.size(), q, std::move(values));
  if (has_truth) data.true_membership = std::move(truth);
  return data;
}

inline Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);
  return read_dataset_csv(in);
}

inline void write_dataset_csv(std::ostream& out, const Dataset& data) {
  out << "time,event,arm";
  for (const auto& name : data.feature_names) out << ',' << name;
  if (data.true_membership) out << ",true_group";
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& o = data.observations[i];
    out << format_double(o.time_months) << ',' << o.event << ',' << o.arm;
    for (double x : data.covariates.row(i)) out << ',' << format_double(x);
    if (data.true_membership) out << ',' << (*data.true_membership)[i];
    out << '\n';
  }
}

// ---- JSON documents ---------------------------------------------------------

namespace detail {

inline void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> known,
                                std::string_view where) {
  if (!j.is_object()) throw UsageError(std::string(where) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || key == k;
    if (!ok) throw UsageError("unknown key '" + key + "' in " + std::string(where));
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& into) {
  if (j.contains(key)) {
    try {
      into = j.at(key).get<T>();
    } catch (const json::exception& e) {
      throw UsageError(std::string("invalid value for '") + key + "': " + e.what());
    }
  }
}

}  // namespace detail

inline json to_json(const BoostConfig& c) {
  return {{"num_trees", c.num_trees},         {"learning_rate", c.learning_rate},
          {"max_depth", c.max_depth},         {"lambda_l2", c.lambda_l2},
          {"gamma_split", c.gamma_split},     {"hessian_const", c.hessian_const},
          {"min_child_weight", c.min_child_weight}, {"min_samples_leaf", c.min_samples_leaf},
          {"normalize_loss", c.normalize_loss}};
}

inline BoostConfig boost_config_from_json(const json& j, BoostConfig c = {}) {
  detail::reject_unknown_keys(j,
                              {"num_trees", "learning_rate", "max_depth", "lambda_l2",
                               "gamma_split", "hessian_const", "min_child_weight",
                               "min_samples_leaf", "normalize_loss"},
                              "boost config");
  detail::read_opt(j, "num_trees", c.num_trees);
  detail::read_opt(j, "learning_rate", c.learning_rate);
  detail::read_opt(j, "max_depth", c.max_depth);
  detail::read_opt(j, "lambda_l2", c.lambda_l2);
  detail::read_opt(j, "gamma_split", c.gamma_split);
  detail::read_opt(j, "hessian_const", c.hessian_const);
  detail::read_opt(j, "min_child_weight", c.min_child_weight);
  detail::read_opt(j, "min_samples_leaf", c.min_samples_leaf);
  detail::read_opt(j, "normalize_loss", c.normalize_loss);
  c.validate();
  return c;
}

inline json to_json(const SimConfig& c) {
  return {{"scenario", c.scenario},
          {"setting", c.setting},
          {"n", c.n},
          {"q", c.q},
          {"rho", c.rho},
          {"beta0", c.beta0},
          {"sigma0", c.sigma0},
          {"beta_z", c.effective_beta_z()},
          {"enrollment_months", c.enrollment_months},
          {"followup_months", c.followup_months},
          {"yearly_dropout", c.yearly_dropout},
          {"seed", c.seed},
          {"no_interaction", c.no_interaction}};
}

inline SimConfig sim_config_from_json(const json& j, SimConfig c = {}) {
  detail::reject_unknown_keys(j,
                              {"scenario", "setting", "n", "q", "rho", "beta0", "sigma0",
                               "beta_z", "enrollment_months", "followup_months",
                               "yearly_dropout", "seed", "no_interaction"},
                              "simulation config");
  detail::read_opt(j, "scenario", c.scenario);
  detail::read_opt(j, "setting", c.setting);
  detail::read_opt(j, "n", c.n);
  detail::read_opt(j, "q", c.q);
  detail::read_opt(j, "rho", c.rho);
  detail::read_opt(j, "beta0", c.beta0);
  detail::read_opt(j, "sigma0", c.sigma0);
  detail::read_opt(j, "beta_z", c.beta_z);
  detail::read_opt(j, "enrollment_months", c.enrollment_months);
  detail::read_opt(j, "followup_months", c.followup_months);
  detail::read_opt(j, "yearly_dropout", c.yearly_dropout);
  detail::read_opt(j, "seed", c.seed);
  detail::read_opt(j, "no_interaction", c.no_interaction);
  c.validate();
  return c;
}

inline json to_json(const CvGrid& g) {
  return {{"learning_rates", g.learning_rates},
          {"max_depths", g.max_depths},
          {"num_trees", g.num_trees},
          {"folds", g.folds},
          {"seed", g.seed}};
}

inline CvGrid cv_grid_from_json(const json& j, CvGrid g = {}) {
  detail::reject_unknown_keys(j, {"learning_rates", "max_depths", "num_trees", "folds", "seed"},
                              "cv config");
  detail::read_opt(j, "learning_rates", g.learning_rates);
  detail::read_opt(j, "max_depths", g.max_depths);
  detail::read_opt(j, "num_trees", g.num_trees);
  detail::read_opt(j, "folds", g.folds);
  detail::read_opt(j, "seed", g.seed);
  return g;
}

// Top-level run configuration document; every section is optional.
struct RunConfig {
  SimConfig simulation;
  BoostConfig boost;
  CvGrid cv;
  HorizonPolicy horizon;
  double cutoff = 0.5;
  std::uint64_t seed = 0;
};

inline RunConfig run_config_from_json(const json& j) {
  detail::reject_unknown_keys(j, {"simulation", "boost", "cv", "horizon", "cutoff", "seed"},
                              "run config");
  RunConfig rc;
  if (j.contains("simulation")) rc.simulation = sim_config_from_json(j.at("simulation"));
  if (j.contains("boost")) rc.boost = boost_config_from_json(j.at("boost"));
  if (j.contains("cv")) rc.cv = cv_grid_from_json(j.at("cv"));
  if (j.contains("horizon")) {
    const auto& h = j.at("horizon");
    if (h.is_string() && h.get<std::string>() == "auto") {
      rc.horizon.fixed.reset();
    } else if (h.is_number()) {
      rc.horizon.fixed = TimeHorizon(h.get<double>()).t_star();
    } else {
      throw UsageError("horizon must be \"auto\" or a positive number of months");
    }
  }
  detail::read_opt(j, "cutoff", rc.cutoff);
  detail::require(rc.cutoff > 0.0 && rc.cutoff < 1.0, "cutoff must lie in (0, 1)");
  detail::read_opt(j, "seed", rc.seed);
  rc.cv.base = rc.boost;
  return rc;
}

inline RunConfig read_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw UsageError("malformed config file " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

inline json simulation_metadata(const SimConfig& c) {
  return {{"generator", std::string(kGeneratorName)}, {"simulation", to_json(c)}};
}

// ---- model -------------------------------------------------------------------

inline constexpr std::string_view kModelFormat = "rmstboost-model";

inline json to_json(const BoostedModel& m) {
  json trees = json::array();
  for (const auto& t : m.trees) {
    json nodes = json::array();
    for (const auto& nd : t.nodes)
      nodes.push_back({{"split_feature", nd.split_feature},
                       {"threshold", nd.threshold},
                       {"left", nd.left},
                       {"right", nd.right},
                       {"leaf_value", nd.leaf_value},
                       {"gain", nd.gain},
                       {"cover", nd.cover}});
    trees.push_back({{"nodes", std::move(nodes)}});
  }
  return {{"format", std::string(kModelFormat)},
          {"version", 1},
          {"config", to_json(m.config)},
          {"base_logit", m.base_logit},
          {"horizon", m.horizon.t_star()},
          {"feature_names", m.feature_names},
          {"loss_trace", m.loss_trace},
          {"trees", std::move(trees)}};
}

inline BoostedModel model_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat || j.at("version").get<int>() != 1)
      throw DataError("not an rmstboost model document");
    BoostedModel m;
    m.config = boost_config_from_json(j.at("config"));
    m.base_logit = j.at("base_logit").get<double>();
    m.horizon = TimeHorizon(j.at("horizon").get<double>());
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.loss_trace = j.at("loss_trace").get<std::vector<double>>();
    const auto q = static_cast<int>(m.feature_names.size());
    for (const auto& jt : j.at("trees")) {
      Tree t;
      for (const auto& jn : jt.at("nodes")) {
        TreeNode nd;
        nd.split_feature = jn.at("split_feature").get<int>();
        nd.threshold = jn.at("threshold").get<double>();
        nd.left = jn.at("left").get<int>();
        nd.right = jn.at("right").get<int>();
        nd.leaf_value = jn.at("leaf_value").get<double>();
        nd.gain = jn.at("gain").get<double>();
        nd.cover = jn.at("cover").get<double>();
        t.nodes.push_back(nd);
      }
      const auto count = static_cast<int>(t.nodes.size());
      if (count == 0) throw DataError("model tree has no nodes");
      // Children always follow their parent, which rules out cycles.
      for (int k = 0; k < count; ++k) {
        const auto& nd = t.nodes[static_cast<std::size_t>(k)];
        if (!nd.is_leaf() && (nd.split_feature < 0 || nd.split_feature >= q || nd.left <= k ||
                              nd.right <= k || nd.left >= count || nd.right >= count))
          throw DataError("model tree node is malformed");
      }
      m.trees.push_back(std::move(t));
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model document: ") + e.what());
  }
}

inline void save_model(const BoostedModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file: " + path);
  out << to_json(m).dump(1) << '\n';
}

inline BoostedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("malformed model file " + path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace rmstboost

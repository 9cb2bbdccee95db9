// Command-line front end: simulate, fit, predict, eval, benchmark, curves,
// permtest. Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
// failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rmstboost.hpp"

namespace {

using namespace rmstboost;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

// Shortest human-report formatting: 4 significant digits.
std::string fmt4(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  return out;
}

// Booster flags shared by fit and permtest; unset flags keep config values.
struct BoostFlags {
  std::optional<int> num_trees;
  std::optional<double> learning_rate;
  std::optional<int> max_depth;
  std::optional<double> lambda_l2;
  std::optional<double> gamma_split;
  std::optional<double> hessian_const;
  std::optional<double> min_child_weight;
  std::optional<int> min_samples_leaf;

  void add_to(CLI::App* app) {
    app->add_option("--num-trees", num_trees, "Number of trees K (default 100)");
    app->add_option("--learning-rate", learning_rate, "Shrinkage in (0,1] (default 0.1)");
    app->add_option("--max-depth", max_depth, "Maximum tree depth (default 3)");
    app->add_option("--lambda", lambda_l2, "L2 leaf penalty lambda (default 1)");
    app->add_option("--gamma", gamma_split, "Per-split penalty gamma (default 0)");
    app->add_option("--hessian", hessian_const, "Constant curvature h0 (default 0.001)");
    app->add_option("--min-child-weight", min_child_weight, "Minimum child curvature (default 0)");
    app->add_option("--min-samples-leaf", min_samples_leaf, "Minimum rows per leaf (default 1)");
  }

  BoostConfig apply(BoostConfig c) const {
    if (num_trees) c.num_trees = *num_trees;
    if (learning_rate) c.learning_rate = *learning_rate;
    if (max_depth) c.max_depth = *max_depth;
    if (lambda_l2) c.lambda_l2 = *lambda_l2;
    if (gamma_split) c.gamma_split = *gamma_split;
    if (hessian_const) c.hessian_const = *hessian_const;
    if (min_child_weight) c.min_child_weight = *min_child_weight;
    if (min_samples_leaf) c.min_samples_leaf = *min_samples_leaf;
    c.validate();
    return c;
  }
};

HorizonPolicy parse_tstar(const std::string& text, HorizonPolicy fallback) {
  if (text.empty()) return fallback;
  if (text == "auto") return HorizonPolicy{};
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return HorizonPolicy{TimeHorizon(v).t_star()};
  } catch (const std::logic_error&) {
    throw UsageError("--tstar must be 'auto' or a positive number of months");
  }
}

RunConfig load_config(const std::string& path) {
  return path.empty() ? RunConfig{} : read_run_config(path);
}

json metrics_json(const Metrics& m) {
  json j = {{"value_hat", m.value_hat}};
  const auto opt = [&](const char* k, const std::optional<double>& v) {
    j[k] = v ? json(*v) : json(nullptr);
  };
  opt("accuracy", m.accuracy);
  opt("sensitivity", m.sensitivity);
  opt("specificity", m.specificity);
  opt("s1_rank", m.s1_rank);
  opt("s2_rank", m.s2_rank);
  return j;
}

// Memberships from a CSV with a `membership` column, or a single column.
std::vector<int> read_memberships(const std::string& path, std::size_t expected) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open memberships file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("memberships file is empty");
  const auto header = detail::split_csv_line(line);
  std::size_t col = 0;
  bool found = false;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == "membership") {
      col = c;
      found = true;
    }
  if (!found && header.size() != 1)
    throw DataError("memberships file needs a 'membership' column");
  std::vector<int> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size())
      throw DataError("memberships line " + std::to_string(line_no) + " has the wrong width");
    out.push_back(detail::parse_binary(fields[col], line_no, "membership"));
  }
  if (out.size() != expected)
    throw DataError("memberships file has " + std::to_string(out.size()) + " rows, dataset has " +
                    std::to_string(expected));
  return out;
}

std::vector<int> parse_scenarios(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      const int s = std::stoi(item);
      if (s < 1 || s > 6) throw std::out_of_range(item);
      out.push_back(s);
    } catch (const std::logic_error&) {
      throw UsageError("--scenarios must be a comma-separated list of values in 1..6");
    }
  }
  if (out.empty()) throw UsageError("--scenarios must name at least one scenario");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subgroup identification for two-arm survival trials by boosting an RMST value"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads (default 1)")->check(CLI::Range(1, 1024));

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate a trial dataset");
  int sim_scenario = 1, sim_setting = 1;
  std::size_t sim_n = 500;
  std::uint64_t sim_seed = 0;
  std::optional<std::size_t> sim_q;
  bool sim_null = false;
  std::string sim_out, sim_config;
  sim_cmd->add_option("--scenario", sim_scenario, "Subgroup pattern (default 1)")
      ->check(CLI::Range(1, 6));
  sim_cmd->add_option("--setting", sim_setting, "1 = no prognostic effects, 2 = prognostic (default 1)")
      ->check(CLI::Range(1, 2));
  sim_cmd->add_option("--n", sim_n, "Number of patients (default 500)")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", sim_seed, "Random seed (default 0)");
  sim_cmd->add_option("--q", sim_q, "Number of noise covariates Z (default 50)");
  sim_cmd->add_flag("--no-interaction", sim_null, "Replace the treatment term by zero");
  sim_cmd->add_option("--config", sim_config, "Run-config JSON; its simulation section is the base");
  sim_cmd->add_option("--out", sim_out, "Output dataset CSV")->required();

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit a boosted membership model");
  std::string fit_data, fit_config, fit_model, fit_report, fit_tstar;
  bool fit_cv = false;
  double fit_cutoff = -1.0;
  BoostFlags fit_flags;
  fit_cmd->add_option("--data", fit_data, "Training dataset CSV")->required();
  fit_cmd->add_option("--config", fit_config, "Run-config JSON (boost, cv, horizon, cutoff)");
  fit_cmd->add_flag("--cv", fit_cv,
                    "Select learning rate, depth and tree count by cross-validation "
                    "(default grid: rates 0.05,0.1,0.3; depths 2,3; trees 50,100,200; 5 folds)");
  fit_cmd->add_option("--model-out", fit_model, "Output model JSON")->required();
  fit_cmd->add_option("--report", fit_report, "Fit report JSON (default: stdout)");
  fit_cmd->add_option("--tstar", fit_tstar, "RMST horizon: 'auto' (min of per-arm maxima) or months");
  fit_cmd->add_option("--cutoff", fit_cutoff, "Membership cutoff for the report (default 0.5)");
  fit_flags.add_to(fit_cmd);

  // predict
  auto* pred_cmd = app.add_subcommand("predict", "Score patients with a fitted model");
  std::string pred_model, pred_data, pred_out;
  double pred_cutoff = 0.5;
  pred_cmd->add_option("--model", pred_model, "Model JSON")->required();
  pred_cmd->add_option("--data", pred_data, "Dataset CSV")->required();
  pred_cmd->add_option("--cutoff", pred_cutoff, "Membership cutoff in (0,1) (default 0.5)");
  pred_cmd->add_option("--out", pred_out, "Output CSV (default: stdout)");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Validation metrics of a fitted model");
  std::string eval_model, eval_data, eval_tstar;
  double eval_cutoff = 0.5;
  bool eval_soft = false;
  eval_cmd->add_option("--model", eval_model, "Model JSON")->required();
  eval_cmd->add_option("--data", eval_data, "Validation dataset CSV")->required();
  eval_cmd->add_option("--cutoff", eval_cutoff, "Membership cutoff in (0,1) (default 0.5)");
  eval_cmd->add_option("--tstar", eval_tstar, "RMST horizon: 'auto' (default) or months");
  eval_cmd->add_flag("--soft", eval_soft, "Value with soft scores instead of hard memberships");

  // benchmark
  auto* bench_cmd = app.add_subcommand("benchmark", "Monte Carlo benchmark over scenarios");
  std::string bench_scenarios = "1", bench_out, bench_config, bench_summary;
  int bench_setting = 1, bench_reps = 10;
  std::uint64_t bench_seed = 0;
  std::size_t bench_train = 500, bench_valid = 2000;
  bench_cmd->add_option("--scenarios", bench_scenarios, "Comma-separated scenarios (default 1)");
  bench_cmd->add_option("--setting", bench_setting, "Setting 1 or 2 (default 1)")->check(CLI::Range(1, 2));
  bench_cmd->add_option("--replicates", bench_reps, "Replicates per scenario (default 10)")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seed", bench_seed, "Master seed (default 0)");
  bench_cmd->add_option("--n-train", bench_train, "Training size (default 500)");
  bench_cmd->add_option("--n-valid", bench_valid, "Validation size (default 2000)");
  bench_cmd->add_option("--config", bench_config, "Run-config JSON (cv grid, boost, simulation base)");
  bench_cmd->add_option("--summary", bench_summary, "Optional JSON summary with per-replicate metrics");
  bench_cmd->add_option("--out", bench_out, "Output CSV")->required();

  // curves
  auto* curve_cmd = app.add_subcommand("curves", "Export arm-by-subgroup survival curves");
  std::string curve_data, curve_members, curve_est = "na", curve_out;
  curve_cmd->add_option("--data", curve_data, "Dataset CSV")->required();
  curve_cmd->add_option("--memberships", curve_members, "CSV with a membership column")->required();
  curve_cmd->add_option("--estimator", curve_est, "na (Nelson-Aalen, default) or km")
      ->check(CLI::IsMember({"na", "km"}));
  curve_cmd->add_option("--out", curve_out, "Output CSV (default: stdout)");

  // permtest
  auto* perm_cmd = app.add_subcommand("permtest", "Permutation test for differential effect");
  std::string perm_data, perm_config, perm_out, perm_tstar;
  int perm_b = 100;
  double perm_alpha = 0.05;
  std::uint64_t perm_seed = 0;
  BoostFlags perm_flags;
  perm_cmd->add_option("--data", perm_data, "Dataset CSV")->required();
  perm_cmd->add_option("--config", perm_config, "Run-config JSON (boost, horizon, cutoff)");
  perm_cmd->add_option("--B", perm_b, "Number of permutations (default 100)")->check(CLI::PositiveNumber);
  perm_cmd->add_option("--alpha", perm_alpha, "Test level in (0,1) (default 0.05)");
  perm_cmd->add_option("--seed", perm_seed, "Random seed (default 0)");
  perm_cmd->add_option("--tstar", perm_tstar, "RMST horizon: 'auto' (default) or months");
  perm_cmd->add_option("--out", perm_out, "CSV of null draws");
  perm_flags.add_to(perm_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*sim_cmd) {
      RunConfig rc = load_config(sim_config);
      SimConfig c = rc.simulation;
      c.scenario = sim_scenario;
      c.setting = sim_setting;
      c.n = sim_n;
      c.seed = sim_seed;
      if (sim_q) {
        c.q = *sim_q;
        c.beta_z.clear();
      }
      c.no_interaction = c.no_interaction || sim_null;
      const auto data = simulate(c);
      auto out = open_out(sim_out);
      write_dataset_csv(out, data);
      auto meta = open_out(sim_out + ".meta.json");
      meta << simulation_metadata(c).dump(2) << '\n';
    } else if (*fit_cmd) {
      RunConfig rc = load_config(fit_config);
      const auto data = read_dataset_csv(fit_data);
      data.validate();
      const auto policy = parse_tstar(fit_tstar, rc.horizon);
      const double cutoff = fit_cutoff > 0.0 ? fit_cutoff : rc.cutoff;
      detail::require(cutoff > 0.0 && cutoff < 1.0, "cutoff must lie in (0, 1)");
      BoostConfig config = fit_flags.apply(rc.boost);
      json report;
      if (fit_cv) {
        CvGrid grid = rc.cv;
        grid.base = config;
        const auto cv = cross_validate(data, grid, policy, threads, cutoff);
        config = cv.best;
        json scores = json::array();
        for (const auto& s : cv.scores)
          scores.push_back({{"learning_rate", s.config.learning_rate},
                            {"max_depth", s.config.max_depth},
                            {"num_trees", s.config.num_trees},
                            {"mean_value", s.mean_value},
                            {"fold_values", s.fold_values}});
        report["cv"] = {{"grid", to_json(grid)}, {"scores", std::move(scores)}};
      }
      const auto horizon = policy.resolve(data);
      const auto model = boost_fit(data, config, horizon);
      save_model(model, fit_model);

      const auto scores = predict_scores(model, data.covariates);
      const auto labels = classify(scores, cutoff);
      report["selected_config"] = to_json(config);
      report["tstar"] = horizon.t_star();
      report["cutoff"] = cutoff;
      report["loss_trace"] = model.loss_trace;
      report["training_value"] = hard_value(data, labels, horizon);
      report["training_value_soft"] =
          value_hat(data, scores, horizon).value / static_cast<double>(data.size());
      if (!model.trees.empty()) {
        const auto vi = variable_importance(model);
        json table = json::array();
        for (std::size_t f = 0; f < vi.feature_names.size(); ++f)
          table.push_back({{"feature", vi.feature_names[f]},
                           {"gain", vi.total_gain[f]},
                           {"rank", vi.rank[f]}});
        report["variable_importance"] = std::move(table);
      }
      if (fit_report.empty()) {
        std::cout << report.dump(2) << '\n';
      } else {
        auto out = open_out(fit_report);
        out << report.dump(2) << '\n';
      }
    } else if (*pred_cmd) {
      detail::require(pred_cutoff > 0.0 && pred_cutoff < 1.0,
                      "cutoff must lie in the open interval (0, 1)");
      const auto model = load_model(pred_model);
      const auto data = read_dataset_csv(pred_data);
      const auto state = predict_scores(model, data.covariates);
      const auto labels = classify(state, pred_cutoff);
      std::ostringstream os;
      os << "row_index,logit,score,membership\n";
      for (std::size_t i = 0; i < state.size(); ++i)
        os << i << ',' << format_double(state.logits()[i]) << ','
           << format_double(state.scores()[i]) << ',' << labels[i] << '\n';
      if (pred_out.empty()) {
        std::cout << os.str();
      } else {
        open_out(pred_out) << os.str();
      }
    } else if (*eval_cmd) {
      const auto model = load_model(eval_model);
      const auto data = read_dataset_csv(eval_data);
      data.validate();
      const auto horizon = parse_tstar(eval_tstar, HorizonPolicy{}).resolve(data);
      const auto m = evaluate(model, data, eval_cutoff, horizon,
                              eval_soft ? MembershipMode::kSoft : MembershipMode::kHard);
      json j = metrics_json(m);
      j["tstar"] = horizon.t_star();
      j["n"] = data.size();
      std::cout << j.dump(2) << '\n';
    } else if (*bench_cmd) {
      RunConfig rc = load_config(bench_config);
      BenchmarkRequest req;
      req.scenarios = parse_scenarios(bench_scenarios);
      req.setting = bench_setting;
      req.replicates = bench_reps;
      req.n_train = bench_train;
      req.n_valid = bench_valid;
      req.grid = rc.cv;
      req.seed = bench_seed;
      req.sim = rc.simulation;
      req.sim.beta_z.clear();
      req.cutoff = rc.cutoff;
      req.horizon = rc.horizon;
      req.threads = threads;
      const auto report = benchmark(req);
      std::ostringstream os;
      os << "scenario,setting,metric,mean,sd,replicates\n";
      for (const auto& s : report.scenarios)
        for (const auto& m : s.metrics)
          if (m.count > 0)
            os << s.scenario << ',' << s.setting << ',' << m.name << ',' << format_double(m.mean)
               << ',' << format_double(m.sd) << ',' << m.count << '\n';
      open_out(bench_out) << os.str();
      if (!bench_summary.empty()) {
        json summary = json::array();
        for (const auto& s : report.scenarios) {
          json reps = json::array();
          for (std::size_t r = 0; r < s.per_replicate.size(); ++r) {
            json row = metrics_json(s.per_replicate[r]);
            row["selected_config"] = to_json(s.selected[r]);
            reps.push_back(std::move(row));
          }
          summary.push_back({{"scenario", s.scenario},
                             {"setting", s.setting},
                             {"replicates", s.replicates},
                             {"per_replicate", std::move(reps)}});
        }
        open_out(bench_summary) << json{{"grid", to_json(req.grid)}, {"seed", bench_seed},
                                        {"results", std::move(summary)}}
                                       .dump(2)
                                << '\n';
      }
      std::cerr << "benchmark: " << req.scenarios.size() * static_cast<std::size_t>(bench_reps)
                << " replicates in " << fmt4(report.wall_seconds) << " s\n";
      for (const auto& s : report.scenarios) {
        std::cerr << "  scenario " << s.scenario << " setting " << s.setting << ':';
        for (const auto& m : s.metrics)
          if (m.count > 0) std::cerr << ' ' << m.name << ' ' << fmt4(m.mean) << " (" << fmt4(m.sd) << ')';
        std::cerr << '\n';
      }
    } else if (*curve_cmd) {
      const auto data = read_dataset_csv(curve_data);
      data.validate();
      const auto members = read_memberships(curve_members, data.size());
      std::ostringstream os;
      os << "subgroup,arm,time,survival\n";
      for (int group : {1, 0}) {
        std::vector<double> w(data.size());
        bool any = false;
        for (std::size_t i = 0; i < w.size(); ++i) {
          w[i] = members[i] == group ? 1.0 : 0.0;
          any = any || members[i] == group;
        }
        if (!any) continue;
        for (int arm : {1, 0}) {
          bool arm_present = false;
          for (std::size_t i = 0; i < w.size(); ++i)
            arm_present = arm_present || (w[i] > 0.0 && data.observations[i].arm == arm);
          if (!arm_present) continue;
          const auto curve =
              curve_est == "km" ? km_curve(data, w, arm) : weighted_survival_curve(data, w, arm);
          os << group << ',' << arm << ",0,1\n";
          for (std::size_t k = 0; k < curve.jump_times.size(); ++k)
            os << group << ',' << arm << ',' << format_double(curve.jump_times[k]) << ','
               << format_double(curve.survival_values[k]) << '\n';
        }
      }
      if (curve_out.empty()) {
        std::cout << os.str();
      } else {
        open_out(curve_out) << os.str();
      }
    } else if (*perm_cmd) {
      RunConfig rc = load_config(perm_config);
      const auto data = read_dataset_csv(perm_data);
      data.validate();
      const auto config = perm_flags.apply(rc.boost);
      const auto policy = parse_tstar(perm_tstar, rc.horizon);
      const auto res =
          permutation_test(data, config, policy, perm_b, perm_alpha, perm_seed, threads, rc.cutoff);
      if (!perm_out.empty()) {
        std::ostringstream os;
        os << "draw,null_value\n";
        for (std::size_t b = 0; b < res.null_values.size(); ++b)
          os << b << ',' << format_double(res.null_values[b]) << '\n';
        open_out(perm_out) << os.str();
      }
      std::cout << json{{"observed_value", res.observed_value},
                        {"p_value", res.p_value},
                        {"critical_value", res.critical_value},
                        {"alpha", perm_alpha},
                        {"permutations", perm_b},
                        {"reject", res.reject}}
                       .dump(2)
                << '\n';
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}

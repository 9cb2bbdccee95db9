#include "rmstboost/io.hpp"

#include <cstdio>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "rmstboost/simulate.hpp"

namespace rmstboost {
namespace {

Dataset read(const std::string& text) {
  std::istringstream in(text);
  return read_dataset_csv(in);
}

TEST(DatasetCsv, RoundTripIsExact) {
  SimConfig c;
  c.scenario = 4;
  c.n = 60;
  c.q = 3;
  c.seed = 21;
  const auto d = simulate(c);
  std::ostringstream out;
  write_dataset_csv(out, d);
  const auto back = read(out.str());
  EXPECT_EQ(back.observations, d.observations);
  EXPECT_EQ(back.covariates, d.covariates);
  EXPECT_EQ(back.feature_names, d.feature_names);
  EXPECT_EQ(back.true_membership, d.true_membership);
}

TEST(DatasetCsv, OptionalTruthColumnAndCrlf) {
  const auto d = read("time,event,arm,a,b\r\n1.5,1,0,0.1,2\r\n2,0,1,-3,4e-2\r\n");
  EXPECT_FALSE(d.true_membership);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.covariates(1, 1), 0.04);
  EXPECT_NO_THROW(d.validate());
}

TEST(DatasetCsv, RejectsMalformedInput) {
  EXPECT_THROW(read(""), DataError);
  EXPECT_THROW(read("event,time,arm,a\n"), DataError);
  EXPECT_THROW(read("time,event,arm,a,a\n"), DataError);
  EXPECT_THROW(read("time,event,arm,arm\n"), DataError);
  EXPECT_THROW(read("time,event,arm,a\n1,1,0\n"), DataError);
  EXPECT_THROW(read("time,event,arm,a\n1,2,0,0\n"), DataError);
  EXPECT_THROW(read("time,event,arm,a\n0,1,0,0\n"), DataError);
  EXPECT_THROW(read("time,event,arm,a\n1,1,0,nan\n"), DataError);
  EXPECT_THROW(read("time,event,arm,a\n1,1,0,x\n"), DataError);
  try {
    read("time,event,arm,a\n1,1,0,0\n2,1,1,oops\n");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(ModelJson, SaveLoadPreservesPredictionsExactly) {
  SimConfig c;
  c.n = 150;
  c.q = 4;
  c.seed = 3;
  const auto d = simulate(c);
  BoostConfig bc;
  bc.num_trees = 25;
  const auto m = boost_fit(d, bc, default_horizon(d));
  const auto path = (std::filesystem::temp_directory_path() / "rmstboost_io_test_model.json").string();
  save_model(m, path);
  const auto back = load_model(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back, m);
  for (std::size_t i = 0; i < d.size(); ++i)
    EXPECT_EQ(predict_logit(back, d.covariates.row(i)), predict_logit(m, d.covariates.row(i)));
}

TEST(ModelJson, RejectsMalformedDocuments) {
  BoostedModel m;
  m.feature_names = {"a"};
  Tree t;
  t.nodes.resize(3);
  t.nodes[0] = {0, 0.5, 1, 2, 0.0, 1.0, 1.0};
  m.trees.push_back(t);
  auto j = to_json(m);
  EXPECT_NO_THROW(model_from_json(j));
  auto bad_format = j;
  bad_format["format"] = "other";
  EXPECT_THROW(model_from_json(bad_format), DataError);
  auto cycle = j;
  cycle["trees"][0]["nodes"][0]["left"] = 0;
  EXPECT_THROW(model_from_json(cycle), DataError);
  auto bad_feature = j;
  bad_feature["trees"][0]["nodes"][0]["split_feature"] = 3;
  EXPECT_THROW(model_from_json(bad_feature), DataError);
  auto missing = j;
  missing.erase("trees");
  EXPECT_THROW(model_from_json(missing), DataError);
  EXPECT_THROW(load_model("/nonexistent/model.json"), DataError);
}

TEST(RunConfig, ParsesSectionsAndRejectsUnknownKeys) {
  const auto rc = run_config_from_json(json::parse(R"({
    "simulation": {"scenario": 3, "n": 80},
    "boost": {"learning_rate": 0.2, "max_depth": 2},
    "cv": {"num_trees": [10, 20], "folds": 4},
    "horizon": 12.5,
    "cutoff": 0.4,
    "seed": 9
  })"));
  EXPECT_EQ(rc.simulation.scenario, 3);
  EXPECT_EQ(rc.simulation.n, 80u);
  EXPECT_EQ(rc.boost.learning_rate, 0.2);
  EXPECT_EQ(rc.cv.num_trees, (std::vector<int>{10, 20}));
  EXPECT_EQ(rc.cv.folds, 4);
  EXPECT_EQ(rc.cv.base, rc.boost);
  EXPECT_EQ(*rc.horizon.fixed, 12.5);
  EXPECT_EQ(rc.cutoff, 0.4);
  EXPECT_EQ(rc.seed, 9u);

  EXPECT_FALSE(run_config_from_json(json::parse(R"({"horizon": "auto"})")).horizon.fixed);
  EXPECT_THROW(run_config_from_json(json::parse(R"({"boost": {"eta": 0.1}})")), UsageError);
  EXPECT_THROW(run_config_from_json(json::parse(R"({"extra": 1})")), UsageError);
  EXPECT_THROW(run_config_from_json(json::parse(R"({"horizon": -1})")), UsageError);
  EXPECT_THROW(run_config_from_json(json::parse(R"({"cutoff": 1})")), UsageError);
  EXPECT_THROW(run_config_from_json(json::parse(R"({"boost": {"max_depth": "x"}})")), UsageError);
}

TEST(ConfigJson, RoundTrips) {
  BoostConfig b;
  b.learning_rate = 0.05;
  b.normalize_loss = false;
  EXPECT_EQ(boost_config_from_json(to_json(b)), b);
  SimConfig s;
  s.scenario = 6;
  s.beta_z.assign(s.q, 0.1);
  EXPECT_EQ(sim_config_from_json(to_json(s)), s);
  CvGrid g;
  g.learning_rates = {0.2};
  const auto back = cv_grid_from_json(to_json(g));
  EXPECT_EQ(back.learning_rates, g.learning_rates);
  EXPECT_EQ(back.num_trees, g.num_trees);
}

TEST(FormatDouble, SeventeenDigitsRoundTrip) {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 12345.678901234567, -2.5}) {
    EXPECT_EQ(std::stod(format_double(x)), x);
  }
}

}  // namespace
}  // namespace rmstboost

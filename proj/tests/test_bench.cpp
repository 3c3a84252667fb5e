#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "gaugegm/cycle.hpp"
#include "gaugegm/experiment.hpp"
#include "gaugegm/io.hpp"
#include "oracles.hpp"

using namespace gaugegm;

namespace {

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST(Generator, UnbiasedDegreeTwoTable) {
  const auto t = interaction_table(2, 1.0, -1, +1);
  const double e2 = std::exp(2.0);
  ASSERT_EQ(t.size(), 4u);
  EXPECT_NEAR(t[0], e2, 1e-12);
  EXPECT_NEAR(t[1], 1.0, 1e-15);
  EXPECT_NEAR(t[2], 1.0, 1e-15);
  EXPECT_NEAR(t[3], e2, 1e-12);
}

TEST(Generator, BiasedDegreeTwoTable) {
  const auto t = interaction_table(2, 1.0, 1, +1);
  // Counts over x plus the extra 1: (0,0) -> |2-1|, (0,1) -> |1-2|, (1,1) -> |0-3|.
  EXPECT_NEAR(t[0], std::exp(1.0), 1e-12);
  EXPECT_NEAR(t[1], std::exp(1.0), 1e-12);
  EXPECT_NEAR(t[2], std::exp(1.0), 1e-12);
  EXPECT_NEAR(t[3], std::exp(3.0), 1e-12);
}

TEST(Generator, MinusSignInvertsEntries) {
  const auto plus = interaction_table(3, 0.7, 0, +1);
  const auto minus = interaction_table(3, 0.7, 0, -1);
  for (std::size_t k = 0; k < plus.size(); ++k) EXPECT_NEAR(plus[k] * minus[k], 1.0, 1e-14);
}

TEST(Generator, LogSupermodularLinesSatisfyInequality) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ModelRecipe r;
    r.family = GraphFamily::line;
    r.size = 6;
    r.mode = InteractionMode::log_supermodular;
    r.T = 1.0;
    r.seed = seed;
    const ForneyGM gm = gen_model(r);
    for (const Node& n : gm.nodes()) {
      if (n.degree() != 2) continue;
      const auto& t = n.table;
      EXPECT_GE(t[0] * t[3], t[1] * t[2]);
    }
  }
}

TEST(Generator, DeterministicGivenSeed) {
  for (auto family : {GraphFamily::complete, GraphFamily::regular3, GraphFamily::line}) {
    ModelRecipe r;
    r.family = family;
    r.size = 6;
    r.seed = 42;
    const ForneyGM a = gen_model(r);
    const ForneyGM b = gen_model(r);
    EXPECT_EQ(model_to_json(a).dump(), model_to_json(b).dump());
    r.seed = 43;
    EXPECT_NE(model_to_json(a).dump(), model_to_json(gen_model(r)).dump());
  }
}

TEST(Generator, FamilyShapes) {
  ModelRecipe r;
  r.size = 5;
  EXPECT_EQ(gen_model(r).num_edges(), 10u);
  r.family = GraphFamily::regular3;
  r.size = 10;
  const ForneyGM g3 = gen_model(r);
  EXPECT_EQ(g3.num_edges(), 15u);
  for (const Node& n : g3.nodes()) EXPECT_EQ(n.degree(), 3u);
  r.family = GraphFamily::grid;
  r.rows = 3;
  r.cols = 4;
  r.size = 12;
  EXPECT_EQ(gen_model(r).num_edges(), 17u);
  r.family = GraphFamily::line;
  r.size = 7;
  EXPECT_EQ(gen_model(r).num_edges(), 6u);
}

TEST(Generator, InvalidRecipes) {
  ModelRecipe r;
  r.family = GraphFamily::regular3;
  r.size = 7;
  EXPECT_THROW(gen_model(r), InvalidRecipe);
  r.family = GraphFamily::grid;
  r.size = 10;
  r.rows = 3;
  r.cols = 3;
  EXPECT_THROW(gen_model(r), InvalidRecipe);
  r.family = GraphFamily::complete;
  r.size = 4;
  r.T = -1.0;
  EXPECT_THROW(gen_model(r), InvalidRecipe);
  r.T = 1.0;
  r.sign = 0;
  EXPECT_THROW(gen_model(r), InvalidRecipe);
  EXPECT_THROW(parse_family("torus"), InvalidRecipe);
}

TEST(AlternatingCycle, NegativeDeterminantProductAndPositiveZ) {
  for (std::size_t n : {3, 4, 5}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const ForneyGM gm = gen_alternating_cycle(n, 1.0, seed);
      double det = 1.0;
      for (const Node& node : gm.nodes()) {
        for (double v : node.table) EXPECT_GT(v, 0.0);
        det *= node.table[0] * node.table[3] - node.table[1] * node.table[2];
      }
      EXPECT_LT(det, 0.0);
      EXPECT_GT(oracle::partition(gm), 0.0);
    }
  }
}

TEST(AlternatingCycle, ExactGaugeSucceeds) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ForneyGM gm = gen_alternating_cycle(3, 1.0, seed);
    const GaugeSet g = alternating_cycle_exact_gauge(gm);
    const ForneyGM t = apply_gauge(gm, g);
    const std::vector<std::uint8_t> zero(3, 0);
    EXPECT_NEAR(log_config_mass(t, zero), oracle::log_partition(gm), 1e-8);
  }
}

TEST(Metrics, ErrorMetric) {
  EXPECT_EQ(error_metric(std::log(11.0), std::log(11.0)), 0.0);
  EXPECT_DOUBLE_EQ(error_metric(2.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(error_metric(-4.0, -5.0), 0.25);
  EXPECT_THROW(error_metric(1e-13, 0.0), ExactNearZero);
}

TEST(Metrics, RatioMetric) {
  EXPECT_EQ(ratio_metric(3.5, 3.5), 0.0);
  EXPECT_NEAR(ratio_metric(1.0 + std::log(2.0), 1.0), 0.693147, 1e-6);
}

TEST(Experiment, KFourSweepRowCount) {
  ExperimentConfig c;
  c.beta_grid = parse_grid("0.2:2.0:0.2");
  ASSERT_EQ(c.beta_grid.size(), 10u);
  const auto rows = run_experiment_rows(c);
  ASSERT_EQ(rows.size(), 2u * 20u * 10u);
  std::set<std::size_t> instances;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    instances.insert(r.instance);
    EXPECT_EQ(r.method, k % 2 == 0 ? "mf" : "gmf");
    EXPECT_EQ(r.instance, k / 2);
    ASSERT_TRUE(r.error.has_value()) << r.note;
    EXPECT_FALSE(r.ratio.has_value());
    EXPECT_LE(*r.log_z_estimate, *r.log_z_exact + 1e-6);
  }
  EXPECT_EQ(instances.size(), 200u);
  // gmf rows never lose to the mf row of the same instance.
  for (std::size_t k = 0; k < rows.size(); k += 2) {
    EXPECT_GE(*rows[k + 1].log_z_estimate, *rows[k].log_z_estimate - 1e-9);
  }
}

TEST(Experiment, LineSweepIsExact) {
  ExperimentConfig c;
  c.family = GraphFamily::line;
  c.size = 6;
  c.beta_grid = {0.5, 1.0, 1.5};
  c.trials = 10;
  c.methods = {"gmf"};
  c.gmf_gbp_start = true;
  for (const auto& r : run_experiment_rows(c)) {
    ASSERT_TRUE(r.error.has_value()) << r.note;
    EXPECT_LT(*r.error, 1e-3) << "instance " << r.instance;
  }
}

TEST(Experiment, GridRatioIsNonNegative) {
  ExperimentConfig c;
  c.family = GraphFamily::grid;
  c.rows = 5;
  c.cols = 5;
  c.size = 25;
  c.trials = 3;
  c.methods = {"gmf"};
  const auto rows = run_experiment_rows(c);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.n_edges, 40u);
    EXPECT_FALSE(r.error.has_value());
    ASSERT_TRUE(r.ratio.has_value()) << r.note;
    EXPECT_GE(*r.ratio, 0.0);
  }
}

TEST(Experiment, EveryLowerBoundRowIsSound) {
  ExperimentConfig c;
  c.size = 5;
  c.beta_grid = {0.5, 1.5};
  c.trials = 3;
  c.methods = known_methods();
  c.gauged.opt.max_iters = 200;
  const auto rows = run_experiment_rows(c);
  ASSERT_EQ(rows.size(), 2u * 3u * known_methods().size());
  for (const auto& r : rows) {
    ASSERT_TRUE(r.log_z_estimate.has_value()) << r.method << ": " << r.note;
    ASSERT_TRUE(r.error.has_value());
    if (r.method == "bp") {
      EXPECT_NE(r.note.find("not-a-lower-bound"), std::string::npos);
    } else {
      EXPECT_LE(*r.log_z_estimate, *r.log_z_exact + 1e-6) << r.method;
    }
  }
}

TEST(Experiment, DeterministicModuloRuntime) {
  ExperimentConfig c;
  c.beta_grid = {0.4, 1.2};
  c.trials = 4;
  c.methods = {"mf", "gmf", "gbp", "gbp-sequential"};
  const auto a = without_runtime(run_experiment_rows(c));
  EXPECT_EQ(a, without_runtime(run_experiment_rows(c)));
  c.threads = 3;
  EXPECT_EQ(a, without_runtime(run_experiment_rows(c)));
  c.seed = 1;
  EXPECT_NE(a, without_runtime(run_experiment_rows(c)));
}

TEST(Experiment, CsvAndSummary) {
  ExperimentConfig c;
  c.beta_grid = {0.5, 1.0};
  c.trials = 3;
  std::ostringstream csv, summary;
  const auto rows = run_experiment(c, csv, &summary);
  const std::string text = csv.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), kCsvHeader);
  EXPECT_EQ(count_lines(text), 1 + rows.size());

  const auto s = summarize(c, rows);
  ASSERT_EQ(s.size(), 4u);
  for (const auto& row : s) {
    EXPECT_EQ(row.metric, "error");
    EXPECT_EQ(row.count, 3u);
    EXPECT_EQ(row.failures, 0u);
    double mean = 0.0;
    for (const auto& r : rows) {
      if (r.beta == row.beta && r.method == row.method) mean += *r.error / 3.0;
    }
    EXPECT_NEAR(row.mean, mean, 1e-12);
  }
  EXPECT_EQ(count_lines(summary.str()), 5u);
}

TEST(Experiment, BadInstanceDoesNotAbortSweep) {
  ExperimentConfig c;
  c.family = GraphFamily::regular3;
  c.size = 5;  // odd: every recipe is rejected
  c.trials = 2;
  const auto rows = run_experiment_rows(c);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) {
    EXPECT_FALSE(r.log_z_estimate.has_value());
    EXPECT_EQ(r.note.rfind("error:", 0), 0u);
  }
}

TEST(Experiment, ConfigValidation) {
  ExperimentConfig c;
  c.methods = {"mf", "magic"};
  EXPECT_THROW(run_experiment_rows(c), InvalidRecipe);
  c.methods = {"mf"};
  c.trials = 0;
  EXPECT_THROW(run_experiment_rows(c), InvalidRecipe);
  c.trials = 1;
  c.beta_grid.clear();
  EXPECT_THROW(run_experiment_rows(c), InvalidRecipe);
}

TEST(Io, ParseGrid) {
  const auto g = parse_grid("0.2:2.0:0.2");
  ASSERT_EQ(g.size(), 10u);
  EXPECT_DOUBLE_EQ(g.front(), 0.2);
  EXPECT_NEAR(g.back(), 2.0, 1e-12);
  EXPECT_EQ(parse_grid("1:1:0.5").size(), 1u);
  EXPECT_THROW(parse_grid("1:2"), InvalidRecipe);
  EXPECT_THROW(parse_grid("2:1:0.1"), InvalidRecipe);
  EXPECT_THROW(parse_grid("0:1:0"), InvalidRecipe);
}

TEST(Io, ModelRoundTrip) {
  ModelRecipe r;
  r.size = 5;
  r.seed = 9;
  ModelParts p = gen_model(r).parts();
  p.log_scale = -0.75;
  const ForneyGM gm(p);
  const ForneyGM back = model_from_json(json::parse(model_to_json(gm).dump()));
  EXPECT_EQ(model_to_json(back).dump(), model_to_json(gm).dump());
  EXPECT_DOUBLE_EQ(oracle::log_partition(back), oracle::log_partition(gm));
  EXPECT_THROW(model_from_json(json{{"edges", 3}}), InvalidModel);
}

TEST(Io, ResultRoundTrip) {
  LowerBoundResult r = gbp_solve(oracle::one_edge({1, 2}, {3, 4}));
  const LowerBoundResult back = result_from_json(json::parse(result_to_json(r).dump()));
  EXPECT_EQ(back.log_lower_bound, r.log_lower_bound);
  ASSERT_EQ(back.gauges.size(), 1u);
  EXPECT_EQ(max_abs_diff(back.gauges.primary(0), r.gauges.primary(0)), 0.0);
}

TEST(Io, ExperimentConfigFromJson) {
  const json j = json::parse(R"({"graph": "grid", "rows": 2, "cols": 3, "mode": "logsupermodular",
    "sign": "minus", "beta_grid": "0.5:1.5:0.5", "trials": 4, "seed": 7, "methods": ["mf", "gbp"],
    "budget": 100, "inner": "mf", "gmf_gbp_start": true})");
  const ExperimentConfig c = experiment_config_from_json(j);
  EXPECT_EQ(c.family, GraphFamily::grid);
  EXPECT_EQ(c.size, 6u);
  EXPECT_EQ(c.mode, InteractionMode::log_supermodular);
  EXPECT_EQ(c.sign, -1);
  EXPECT_EQ(c.beta_grid.size(), 3u);
  EXPECT_EQ(c.trials, 4u);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.methods, (std::vector<std::string>{"mf", "gbp"}));
  EXPECT_EQ(c.gauged.opt.max_iters, 100u);
  EXPECT_EQ(c.inner, InnerMethod::mf);
  EXPECT_TRUE(c.gmf_gbp_start);
  EXPECT_THROW(experiment_config_from_json(json::parse(R"({"sign": "up"})")), InvalidRecipe);
  EXPECT_THROW(experiment_config_from_json(json::parse(R"({"trials": "many"})")), InvalidRecipe);
}

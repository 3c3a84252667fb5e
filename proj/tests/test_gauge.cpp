#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gaugegm/cycle.hpp"
#include "gaugegm/exact.hpp"
#include "gaugegm/gauge.hpp"
#include "gaugegm/generators.hpp"
#include "oracles.hpp"

using namespace gaugegm;

namespace {

ForneyGM family_model(GraphFamily f, std::size_t n, std::uint64_t seed, InteractionMode mode) {
  ModelRecipe r;
  r.family = f;
  r.size = n;
  r.seed = seed;
  r.mode = mode;
  r.T = 1.0;
  if (f == GraphFamily::grid) {
    r.rows = 2;
    r.cols = n / 2;
  }
  return gen_model(r);
}

ForneyGM line_model(std::size_t n, std::uint64_t seed) { return family_model(GraphFamily::line, n, seed, InteractionMode::generic); }

}  // namespace

TEST(ApplyGauge, IdentityLeavesTablesUnchanged) {
  const ForneyGM gm = family_model(GraphFamily::complete, 4, 1, InteractionMode::generic);
  const ForneyGM t = apply_gauge(gm, GaugeSet::identity(gm.num_edges()));
  for (NodeId a = 0; a < gm.num_nodes(); ++a) EXPECT_EQ(t.node(a).table, gm.node(a).table);
  EXPECT_TRUE(t.gauged());
  EXPECT_EQ(t.log_scale(), gm.log_scale());
}

TEST(ApplyGauge, FlipOnDegreeOneTable) {
  const ForneyGM gm = oracle::one_edge({1, 2}, {3, 4});
  const ForneyGM t = apply_gauge(gm, flip_gauge(gm, 0));
  EXPECT_EQ(t.node(0).table, (std::vector<double>{2, 1}));
  EXPECT_EQ(t.node(1).table, (std::vector<double>{4, 3}));
}

TEST(ApplyGauge, RowIsNewValueColumnIsOldValue) {
  const ForneyGM gm = oracle::one_edge({1, 2}, {3, 4});
  GaugeSet g(std::vector<Mat2>{Mat2{{1.0, 10.0, 0.0, 1.0}}});
  // New entry 0 = 1 * f(0) + 10 * f(1).
  EXPECT_DOUBLE_EQ(apply_gauge(gm, g).node(0).table[0], 21.0);
}

TEST(ApplyGauge, MissingGauge) {
  const ForneyGM gm = oracle::one_edge({1, 2}, {3, 4});
  EXPECT_THROW(apply_gauge(gm, GaugeSet::identity(2)), MissingGauge);
}

TEST(ApplyGauge, RandomGaugesKeepLogEleven) {
  std::mt19937_64 rng(2);
  const ForneyGM gm = oracle::one_edge({1, 2}, {3, 4});
  for (int k = 0; k < 50; ++k) {
    const auto s = signed_log_partition(apply_gauge(gm, oracle::random_gauges(1, rng)));
    EXPECT_EQ(s.sign, 1);
    EXPECT_NEAR(s.log_abs, std::log(11.0), 1e-12);
  }
}

TEST(ApplyGauge, InvarianceAcrossFamilies) {
  std::mt19937_64 rng(9);
  int checked = 0;
  for (auto f : {GraphFamily::complete, GraphFamily::regular3, GraphFamily::grid, GraphFamily::line}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const std::size_t n = f == GraphFamily::complete ? 5 : (f == GraphFamily::line ? 7 : 6);
      const ForneyGM gm = family_model(f, n, seed, seed % 2 ? InteractionMode::generic : InteractionMode::log_supermodular);
      ASSERT_LE(gm.num_edges(), 12u);
      const double z = oracle::partition(gm);
      const auto s = signed_log_partition(apply_gauge(gm, oracle::random_gauges(gm.num_edges(), rng)));
      EXPECT_EQ(s.sign, 1);
      EXPECT_LT(std::abs(std::exp(s.log_abs) - z) / z, 1e-8);
      ++checked;
    }
  }
  EXPECT_EQ(checked, 20);
}

TEST(GaugeSet, ConjugacyHolds) {
  std::mt19937_64 rng(4);
  const GaugeSet g = oracle::random_gauges(6, rng);
  for (EdgeId e = 0; e < g.size(); ++e) {
    const Mat2 p = g.at(e, 0).transpose() * g.at(e, 1);
    EXPECT_LT(max_abs_diff(p, Mat2::identity()), 1e-12);
  }
}

TEST(GaugeSet, ParamsRoundTrip) {
  std::mt19937_64 rng(5);
  const GaugeSet g = oracle::random_gauges(4, rng);
  EXPECT_EQ(GaugeSet::from_params(g.params()), g);
}

TEST(ApplyGauge, Composes) {
  std::mt19937_64 rng(6);
  const ForneyGM gm = family_model(GraphFamily::complete, 4, 3, InteractionMode::generic);
  const GaugeSet g = oracle::random_gauges(gm.num_edges(), rng);
  const GaugeSet h = oracle::random_gauges(gm.num_edges(), rng);
  const ForneyGM two = apply_gauge(apply_gauge(gm, g), h);
  const ForneyGM one = apply_gauge(gm, compose(g, h));
  for (NodeId a = 0; a < gm.num_nodes(); ++a) {
    double scale = 1.0;
    for (double v : one.node(a).table) scale = std::max(scale, std::abs(v));
    for (std::size_t x = 0; x < one.node(a).table.size(); ++x) {
      EXPECT_LT(std::abs(one.node(a).table[x] - two.node(a).table[x]) / scale, 1e-10);
    }
  }
}

TEST(FlipGauge, FlipsDeterminantAndKeepsZ) {
  const ForneyGM gm = line_model(4, 2);
  const ForneyGM t = apply_gauge(gm, flip_gauge(gm, 1));
  const auto det = [](const Node& n) { return n.table[0] * n.table[3] - n.table[1] * n.table[2]; };
  // Edge 1 joins nodes 1 and 2, both degree 2.
  EXPECT_NEAR(det(t.node(1)), -det(gm.node(1)), 1e-12);
  EXPECT_NEAR(det(t.node(2)), -det(gm.node(2)), 1e-12);
  EXPECT_NEAR(exact_log_partition(t), oracle::log_partition(gm), 1e-12);
  const ForneyGM back = apply_gauge(t, flip_gauge(gm, 1));
  for (NodeId a = 0; a < gm.num_nodes(); ++a) EXPECT_EQ(back.node(a).table, gm.node(a).table);
}

TEST(GaugeObjective, ZeroConfigurationAtIdentity) {
  const ForneyGM gm = family_model(GraphFamily::complete, 4, 8, InteractionMode::generic);
  const auto r = gauge_objective_and_gradient(gm, GaugeSet::identity(gm.num_edges()), zero_config_weights(gm));
  double want = 0.0;
  for (const Node& n : gm.nodes()) want += std::log(n.table[0]);
  EXPECT_NEAR(r.value, want, 1e-12);
}

TEST(GaugeObjective, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-0.3, 0.3), w01(0.0, 1.0);
  int tested = 0;
  for (std::uint64_t seed = 0; tested < 10; ++seed) {
    const ForneyGM gm = family_model(GraphFamily::complete, 4, seed, InteractionMode::generic);
    std::vector<Mat2> mats(gm.num_edges());
    for (Mat2& m : mats) {
      for (double& v : m.m) v += u(rng);
    }
    const GaugeSet g(mats);
    NodeWeights w = uniform_weights(gm, 0.0);
    for (auto& row : w) {
      for (double& v : row) v = w01(rng);
    }
    auto r = try_gauge_objective(gm, g, w, true);
    if (!r) continue;
    const auto fd = oracle::fd_gradient(
        [&](const std::vector<double>& p) { return try_gauge_objective(gm, GaugeSet::from_params(p), w, false)->value; },
        g.params());
    EXPECT_LT(oracle::gradient_mismatch(r->gradient, fd), 1e-5);
    ++tested;
  }
}

TEST(GaugeObjective, ScalingIdentity) {
  const ForneyGM gm = oracle::one_edge({1.5, 0.5}, {0.7, 2.0});
  NodeWeights w = {{1.0, 2.0}, {0.5, 0.5}};
  const GaugeSet g(std::vector<Mat2>{Mat2{{1.2, 0.1, -0.2, 0.9}}});
  const double base = gauge_objective_and_gradient(gm, g, w).value;
  for (double c : {0.3, 2.0, 7.5}) {
    const GaugeSet gc(std::vector<Mat2>{c * g.primary(0)});
    const double v = gauge_objective_and_gradient(gm, gc, w).value;
    EXPECT_NEAR(v - base, (3.0 - 1.0) * std::log(c), 1e-12);
  }
}

TEST(GaugeObjective, NonPositiveWeightedEntryThrows) {
  const ForneyGM gm = oracle::one_edge({1, 2}, {3, 4});
  const GaugeSet g(std::vector<Mat2>{Mat2{{1.0, -1.0, 0.0, 1.0}}});  // f_a(0) = 1 - 2 < 0
  EXPECT_THROW(gauge_objective_and_gradient(gm, g, zero_config_weights(gm)), NonPositiveFactorAtWeightedEntry);
}

TEST(Balanced, LeavesFlatObjectivesUnchanged) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  const ForneyGM gm = family_model(GraphFamily::complete, 5, 3, InteractionMode::generic);
  std::vector<Mat2> mats(gm.num_edges());
  for (Mat2& m : mats) {
    m = Mat2{{3.0, 0.0, 0.0, 0.1}};
    for (double& v : m.m) v += u(rng) * 0.01;
  }
  const GaugeSet g(mats);
  const GaugeSet b = balanced(gm, g);
  for (const NodeWeights& w : {zero_config_weights(gm), uniform_weights(gm, 1.0 / 16.0)}) {
    auto x = try_gauge_objective(gm, g, w, false);
    auto y = try_gauge_objective(gm, b, w, false);
    if (!x) continue;
    ASSERT_TRUE(y.has_value());
    EXPECT_NEAR(x->value, y->value, 1e-9);
  }
  EXPECT_NEAR(signed_log_partition(apply_gauge(gm, b)).log_abs, exact_log_partition(gm), 1e-10);
}

TEST(InitialGauges, IdentityWhenFeasible) {
  const ForneyGM gm = family_model(GraphFamily::complete, 4, 1, InteractionMode::generic);
  EXPECT_EQ(initial_gauges(gm, zero_config_weights(gm), 0, 1e-8), GaugeSet::identity(gm.num_edges()));
}

TEST(InitialGauges, NoisyWhenZeroAtOrigin) {
  const ForneyGM gm = oracle::one_edge({0, 2}, {3, 4});
  const GaugeSet g = initial_gauges(gm, zero_config_weights(gm), 3, 1e-8);
  EXPECT_TRUE(gauge_feasible(gm, g, zero_config_weights(gm), 1e-8));
  EXPECT_LE(max_abs_diff(g.primary(0), Mat2::identity()), 0.05);
}

TEST(CycleGauge, ThreeCycleCarriesZAtOrigin) {
  const ForneyGM gm = gen_alternating_cycle(3, 1.0, 0);
  CycleSpectrum sp;
  const GaugeSet g = alternating_cycle_exact_gauge(gm, &sp);
  const ForneyGM t = apply_gauge(gm, g);
  double origin = t.log_scale();
  for (const Node& n : t.nodes()) origin += std::log(n.table[0]);
  EXPECT_NEAR(origin, oracle::log_partition(gm), 1e-10);
  EXPECT_NEAR(std::log(sp.lambda1 + sp.lambda2), oracle::log_partition(gm), 1e-10);
  EXPECT_GT(sp.lambda1, 0.0);
  EXPECT_LT(sp.lambda2, 0.0);

  // One factor [[l1 + l2, l1], [-l2, 0]] up to orientation, the rest identity,
  // all up to scale.
  int identity = 0, special = 0;
  for (const Node& n : t.nodes()) {
    std::vector<double> v = n.table;
    const double s = v[0];
    for (double& x : v) x /= s;
    if (std::abs(v[0] - 1) < 1e-8 && std::abs(v[1]) < 1e-8 && std::abs(v[2]) < 1e-8 && std::abs(v[3] - 1) < 1e-8) {
      ++identity;
      continue;
    }
    const double l1 = sp.lambda1 / (sp.lambda1 + sp.lambda2), l2 = sp.lambda2 / (sp.lambda1 + sp.lambda2);
    const bool direct = std::abs(v[1] - l1) < 1e-8 && std::abs(v[2] + l2) < 1e-8;
    const bool swapped = std::abs(v[2] - l1) < 1e-8 && std::abs(v[1] + l2) < 1e-8;
    if (std::abs(v[3]) < 1e-8 && (direct || swapped)) ++special;
  }
  EXPECT_EQ(identity, 2);
  EXPECT_EQ(special, 1);
}

TEST(CycleGauge, ExactOnOddCycles) {
  for (std::size_t n : {3, 5, 7}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const ForneyGM gm = gen_alternating_cycle(n, 1.0, seed);
      const ForneyGM t = apply_gauge(gm, alternating_cycle_exact_gauge(gm));
      double origin = t.log_scale();
      for (const Node& node : t.nodes()) origin += std::log(node.table[0]);
      const double exact = oracle::log_partition(gm);
      EXPECT_LT(std::abs(origin - exact) / std::abs(exact), 1e-8) << "n=" << n << " seed=" << seed;
    }
  }
}

TEST(CycleGauge, IdentityCycleIsNotAlternating) {
  ModelParts p;
  for (EdgeId k = 0; k < 3; ++k) p.edges.push_back({k, {std::min<NodeId>(k, (k + 1) % 3), std::max<NodeId>(k, (k + 1) % 3)}});
  for (NodeId a = 0; a < 3; ++a) p.nodes.push_back({a, {(a + 2) % 3, a}, {1, 0, 0, 1}});
  EXPECT_THROW(alternating_cycle_exact_gauge(ForneyGM(p)), NotAlternating);
}

TEST(CycleGauge, RejectsNonCycle) {
  EXPECT_THROW(alternating_cycle_exact_gauge(line_model(4, 0)), InvalidModel);
}

TEST(LineJoin, FourNodeLineGivesThreeCycle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ForneyGM gm = line_model(4, seed);
    const LineJoin j = line_to_alternating_cycle(gm);
    ASSERT_TRUE(j.cycle.has_value());
    EXPECT_EQ(j.cycle->num_nodes(), 3u);
    EXPECT_NEAR(signed_log_partition(*j.cycle).log_abs, oracle::log_partition(gm), 1e-10);
    const ForneyGM t = apply_gauge(*j.cycle, alternating_cycle_exact_gauge(*j.cycle));
    double origin = t.log_scale();
    for (const Node& n : t.nodes()) origin += std::log(n.table[0]);
    EXPECT_NEAR(origin, oracle::log_partition(gm), 1e-8);
  }
}

TEST(LineJoin, AllOnesLineIsProductModel) {
  ModelParts p;
  for (EdgeId k = 0; k < 3; ++k) p.edges.push_back({k, {k, k + 1}});
  p.nodes.push_back({0, {0}, {1, 1}});
  p.nodes.push_back({1, {0, 1}, {1, 1, 1, 1}});
  p.nodes.push_back({2, {1, 2}, {1, 1, 1, 1}});
  p.nodes.push_back({3, {2}, {1, 1}});
  const LineJoin j = line_to_alternating_cycle(ForneyGM(p));
  EXPECT_TRUE(j.product_model);
  EXPECT_FALSE(j.cycle.has_value());
}

TEST(LineJoin, PositiveDeterminantsFlipFirstInteriorFactor) {
  ModelParts p;
  for (EdgeId k = 0; k < 3; ++k) p.edges.push_back({k, {k, k + 1}});
  p.nodes.push_back({0, {0}, {1, 2}});
  p.nodes.push_back({1, {0, 1}, {3, 1, 1, 2}});
  p.nodes.push_back({2, {1, 2}, {2, 1, 1, 4}});
  p.nodes.push_back({3, {2}, {1, 3}});
  const ForneyGM gm(p);
  const LineJoin j = line_to_alternating_cycle(gm);
  ASSERT_TRUE(j.flipped_edge.has_value());
  EXPECT_EQ(*j.flipped_edge, 0u);  // the edge entering the first interior factor
  EXPECT_NEAR(signed_log_partition(*j.cycle).log_abs, oracle::log_partition(gm), 1e-12);
}

TEST(LineJoin, TwoSingularFactorsAreDecomposable) {
  ModelParts p;
  for (EdgeId k = 0; k < 4; ++k) p.edges.push_back({k, {k, k + 1}});
  p.nodes.push_back({0, {0}, {1, 2}});
  p.nodes.push_back({1, {0, 1}, {1, 2, 2, 4}});
  p.nodes.push_back({2, {1, 2}, {2, 1, 1, 4}});
  p.nodes.push_back({3, {2, 3}, {1, 1, 3, 3}});
  p.nodes.push_back({4, {3}, {1, 3}});
  EXPECT_THROW(line_to_alternating_cycle(ForneyGM(p)), Decomposable);
}

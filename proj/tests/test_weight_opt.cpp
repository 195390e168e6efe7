#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "esci/dist_sim.hpp"
#include "esci/weight_opt.hpp"
#include "test_support.hpp"

using namespace esci;

namespace {

FusionProblem identity_problem(int d) {
  const SymMatrix i = SymMatrix::identity(d);
  return FusionProblem::independent({SplitEstimate{Vec::Zero(d), i, i}, SplitEstimate{Vec::Zero(d), i, i}});
}

}  // namespace

TEST(Cost, Examples) {
  EXPECT_DOUBLE_EQ(evaluate_cost(SymMatrix::identity(3), CostKind::Trace), 3.0);
  EXPECT_NEAR(evaluate_cost(SymMatrix::scaled_identity(2, std::numbers::e), CostKind::LogDet), 2.0, 1e-14);
  EXPECT_NEAR(evaluate_cost(SymMatrix::scaled_identity(4, 1.5), CostKind::Trace), 6.0, 1e-15);
  Vec d(2);
  d << 3.0, 1.0;
  EXPECT_NEAR(evaluate_cost(SymMatrix::diagonal(d), CostKind::MaxEig), 3.0, 1e-15);
}

TEST(Cost, Parse) {
  EXPECT_EQ(parse_cost("trace"), CostKind::Trace);
  EXPECT_EQ(parse_cost("logdet"), CostKind::LogDet);
  EXPECT_EQ(parse_cost("maxeig"), CostKind::MaxEig);
  EXPECT_FALSE(parse_cost("det").has_value());
  EXPECT_EQ(to_string(CostKind::LogDet), "logdet");
}

TEST(OptimizePair, IdentitySetup) {
  for (int d = 1; d <= 3; ++d) {
    const FusionProblem p = identity_problem(d);
    const WeightSolution s =
        optimize_pair([&](double w) { return esci_fuse(p, Simplex::pair(w)).bound; }, CostKind::Trace);
    EXPECT_NEAR(s.omega[0], 0.5, 1e-6);
    EXPECT_NEAR(s.cost, 1.5 * d, 1e-12);
  }
}

TEST(OptimizePair, DominatedEstimatorExcluded) {
  const std::vector<Estimate> est{{Vec::Zero(2), SymMatrix::identity(2)}, {Vec::Zero(2), SymMatrix::scaled_identity(2, 3.0)}};
  const WeightSolution s = optimize_pair([&](double w) { return ci_fuse(est, Simplex::pair(w)).bound; }, CostKind::Trace);
  EXPECT_DOUBLE_EQ(s.omega[0], 1.0);
  EXPECT_NEAR(s.cost, 2.0, 1e-15);
}

TEST(OptimizePair, KalmanSplitAgreesWithDenseGrid) {
  const LoadedProblem fig1 = testkit::load_builtin("fig1");
  auto fuse = [&](double w) { return esci_fuse(fig1.generic, Simplex::pair(w)).bound; };
  const WeightSolution s = optimize_pair(fuse, CostKind::Trace);
  double best = INFINITY, arg = 0.0;
  for (int k = 0; k <= 100000; ++k) {
    const double w = k / 100000.0;
    const double c = fuse(w).trace();
    if (c < best) {
      best = c;
      arg = w;
    }
  }
  EXPECT_NEAR(s.omega[0], arg, 1e-4);
  EXPECT_LE(s.cost, best + 1e-12);
}

TEST(OptimizePair, EachCostKind) {
  const LoadedProblem fig1 = testkit::load_builtin("fig1");
  auto fuse = [&](double w) { return esci_fuse(fig1.generic, Simplex::pair(w)).bound; };
  for (CostKind k : {CostKind::Trace, CostKind::LogDet, CostKind::MaxEig}) {
    const WeightSolution s = optimize_pair(fuse, k);
    for (int g = 0; g <= 200; ++g) EXPECT_LE(s.cost, evaluate_cost(fuse(g / 200.0), k) + 1e-10);
  }
}

TEST(OptimizeSimplex, SymmetricCentroid) {
  const std::vector<Estimate> est(3, Estimate{Vec::Zero(2), SymMatrix::identity(2)});
  auto fuse = [&](const Simplex& w) { return ci_fuse(est, w).bound; };
  const WeightSolution s = optimize_simplex(fuse, CostKind::Trace, 3);
  EXPECT_LE(s.cost, fuse(Simplex::centroid(3)).trace() + 1e-10);
}

TEST(OptimizeSimplex, DominatedEstimatorNearlyExcluded) {
  std::mt19937_64 rng(31);
  const std::vector<Estimate> est{{Vec::Zero(2), testkit::random_spd(2, rng, 0.5, 2.0)},
                                  {Vec::Zero(2), testkit::random_spd(2, rng, 0.5, 2.0)},
                                  {Vec::Zero(2), SymMatrix::scaled_identity(2, 100.0)}};
  auto fuse = [&](const Simplex& w) { return ci_fuse(est, w).bound; };
  const WeightSolution s = optimize_simplex(fuse, CostKind::Trace, 3);
  EXPECT_LE(s.omega[2], 1e-3);
  double grid = INFINITY;
  for (int a = 0; a <= 200; ++a)
    for (int b = 0; a + b <= 200; ++b) {
      Vec w(3);
      w << a / 200.0, b / 200.0, 0.0;
      w(2) = 1.0 - w(0) - w(1);
      if (w(2) < 0.0) w(2) = 0.0;
      grid = std::min(grid, fuse(Simplex(w)).trace());
    }
  EXPECT_LE(s.cost, grid + 1e-10);
}

TEST(OptimizeSimplex, NetworkFusionEventBeatsGrid) {
  const ScenarioConfig c = scenario_from_json(read_json_file(testkit::data_path("ring4.json")));
  const int d = c.state_dim();
  std::vector<NodeState> pred, upd;
  std::vector<CommonNoiseEstimate> msg;
  for (int i = 0; i < c.node_count(); ++i) {
    pred.push_back(predict(NodeState{c.x0, c.P0, SymMatrix::zero(d), Mat(), std::nullopt}, c));
    upd.push_back(measurement_update(pred[i], 0.0, c.nodes[i].H, c.nodes[i].R));
    msg.push_back(build_split(upd[i], c.nodes[i].H, Rule::ESCI, c));
  }
  std::vector<CommonNoiseEstimate> inputs{prediction_split(pred[0], c.P0, Rule::ESCI, c)};
  for (int j : c.neighbors(0)) inputs.push_back(msg[j]);
  ASSERT_EQ(inputs.size(), 3u);
  const CommonNoiseProblem p{inputs, SymMatrix::scaled_identity(1, c.sigmaW2)};
  auto fuse = [&](const Simplex& w) { return esci_fuse_common_noise(p, w).bound; };
  const WeightSolution s = optimize_simplex(fuse, CostKind::Trace, 3);
  double grid = INFINITY;
  for (int a = 0; a <= 100; ++a)
    for (int b = 0; a + b <= 100; ++b) {
      Vec w(3);
      w << a / 100.0, b / 100.0, std::max(0.0, 1.0 - a / 100.0 - b / 100.0);
      grid = std::min(grid, fuse(Simplex(w)).trace());
    }
  EXPECT_LE(s.cost, grid + 1e-6);
}

TEST(StickBreaking, MapsCubeToSimplex) {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    Vec t(3);
    for (int i = 0; i < 3; ++i) t(i) = u(rng);
    const Simplex w = stick_breaking(t);
    EXPECT_EQ(w.size(), 4);
    EXPECT_NEAR(w.values().sum(), 1.0, 1e-12);
    EXPECT_GE(w.values().minCoeff(), 0.0);
  }
}

#include <gtest/gtest.h>

#include <cmath>

#include "esci/dist_sim.hpp"
#include "test_support.hpp"

using namespace esci;

namespace {

ScenarioConfig ring4(int steps = 100, int trials = 2000) {
  ScenarioConfig c = scenario_from_json(read_json_file(testkit::data_path("ring4.json")));
  c.steps = steps;
  c.trials = trials;
  return c;
}

NodeState initial(const ScenarioConfig& c) {
  return NodeState{c.x0, c.P0, SymMatrix::zero(c.state_dim()), Mat(), std::nullopt};
}

}  // namespace

TEST(Scenario, ProcessNoiseShape) {
  const ScenarioConfig c = ring4();
  EXPECT_NEAR(c.q(0), 1.0 / 6000.0, 1e-18);
  EXPECT_NEAR(c.q(1), 5e-3, 1e-18);
  EXPECT_NEAR(c.q(2), 0.1, 1e-18);
  EXPECT_LT((c.process_cov().mat() - 100.0 * c.q * c.q.transpose()).norm(), 1e-15);
  EXPECT_EQ(c.neighbors(0), (std::vector<int>{1, 3}));
}

TEST(Scenario, ValidationErrors) {
  ScenarioConfig c = ring4();
  c.adjacency[0][1] = false;
  EXPECT_THROW(c.validate(), FusionError);
  ScenarioConfig d = ring4();
  d.nodes[0].R = 0.0;
  EXPECT_THROW(d.validate(), FusionError);
}

TEST(Truth, NoiselessTrajectory) {
  ScenarioConfig c = ring4(20, 1);
  c.sigmaW2 = 0.0;
  c.x0 = Vec::Ones(3);
  for (auto& n : c.nodes) n.R = 1e-30;
  const Trajectory t = simulate_truth(c, NoiseField(1), 0);
  Mat fk = Mat::Identity(3, 3);
  for (int k = 1; k <= 20; ++k) {
    fk = c.F * fk;
    EXPECT_LT((t.x[k] - fk * c.x0).norm(), 1e-12);
    EXPECT_NEAR(t.z(0, k - 1), t.x[k](0), 1e-12);
  }
}

TEST(Truth, OneStepCovarianceMatchesQ) {
  ScenarioConfig c = ring4(1, 1);
  c.F = Mat::Identity(3, 3);
  const NoiseField f(9);
  constexpr int n = 100000;
  Mat s = Mat::Zero(3, 3);
  for (int t = 0; t < n; ++t) {
    const Vec x = simulate_truth(c, f, t).x[1];
    s += x * x.transpose();
  }
  s /= n;
  const Mat q = c.process_cov().mat();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double se = std::sqrt((q(i, i) * q(j, j) + q(i, j) * q(i, j)) / n);
      EXPECT_NEAR(s(i, j), q(i, j), 3.0 * se) << i << ',' << j;
    }
}

TEST(Filter, PredictExamples) {
  ScenarioConfig c = ring4();
  const NodeState p = predict(NodeState{Vec::Zero(3), SymMatrix::identity(3), SymMatrix::zero(3), Mat(), std::nullopt}, c);
  EXPECT_LT((p.cov.mat() - (c.F * c.F.transpose() + c.process_cov().mat())).norm(), 1e-14);
  c.F = Mat::Identity(3, 3);
  c.sigmaW2 = 0.0;
  const NodeState q = predict(initial(c), c);
  EXPECT_EQ(q.cov.mat(), c.P0.mat());
}

TEST(Filter, UpdateExamples) {
  Mat h1 = Mat::Ones(1, 1);
  const NodeState s = measurement_update(
      NodeState{Vec::Zero(1), SymMatrix::identity(1), SymMatrix::zero(1), Mat(), std::nullopt}, 0.0, h1, 1.0);
  EXPECT_NEAR(s.cov(0, 0), 0.5, 1e-15);
  const NodeState big = measurement_update(
      NodeState{Vec::Zero(1), SymMatrix::identity(1), SymMatrix::zero(1), Mat(), std::nullopt}, 0.0, h1, 1e12);
  EXPECT_NEAR(big.cov(0, 0), 1.0, 1e-9);
  const ScenarioConfig c = ring4();
  const NodeState n1 = measurement_update(
      NodeState{Vec::Zero(3), SymMatrix::identity(3), SymMatrix::zero(3), Mat(), std::nullopt}, 0.0, c.nodes[0].H, 1.0);
  Vec d(3);
  d << 0.5, 1.0, 1.0;
  EXPECT_LT((n1.cov.mat() - Mat(d.asDiagonal())).norm(), 1e-15);
  EXPECT_LT((n1.lastMeasCov.mat() - n1.cov.mat() * c.nodes[0].H.transpose() * c.nodes[0].H * n1.cov.mat()).norm(),
            1e-15);
}

TEST(Filter, SplitConsistency) {
  const ScenarioConfig c = ring4();
  const SymMatrix qn = SymMatrix::scaled_identity(1, c.sigmaW2);
  for (int i = 0; i < c.node_count(); ++i) {
    const NodeState u = measurement_update(predict(initial(c), c), 0.3, c.nodes[i].H, c.nodes[i].R);
    for (Rule r : {Rule::CI, Rule::SCI, Rule::ESCI}) {
      const CommonNoiseEstimate e = build_split(u, c.nodes[i].H, r, c);
      const Mat sum = e.unknownCov.mat() + e.indepCov.mat() + e.noiseGain * qn.mat() * e.noiseGain.transpose();
      EXPECT_LT((sum - u.cov.mat()).norm(), 1e-10 * u.cov.norm()) << to_string(r);
      EXPECT_EQ(e.mean, u.mean);
    }
  }
}

TEST(Filter, SplitWithoutMeasurement) {
  const ScenarioConfig c = ring4();
  const NodeState u = measurement_update(predict(initial(c), c), 0.0, c.nodes[0].H, 1e15);
  const CommonNoiseEstimate s = build_split(u, c.nodes[0].H, Rule::SCI, c);
  EXPECT_LT(s.indepCov.norm(), 1e-12);
  const CommonNoiseEstimate e = build_split(u, c.nodes[0].H, Rule::ESCI, c);
  EXPECT_LT((e.noiseGain + c.q).norm(), 1e-12);
}

TEST(Fusion, NoNeighborsIsIdentity) {
  const ScenarioConfig c = ring4();
  const NodeState p = predict(initial(c), c);
  for (Rule r : {Rule::CI, Rule::SCI, Rule::ESCI}) {
    const NodeState f = fuse_neighborhood(p, c.P0, {}, r, c);
    EXPECT_LT((f.cov.mat() - p.cov.mat()).norm(), 1e-12 * p.cov.norm());
    EXPECT_LT((f.mean - p.mean).norm(), 1e-15);
  }
}

TEST(Fusion, CiDuplicatesAreNotDoubleCounted) {
  const ScenarioConfig c = ring4();
  const NodeState p = predict(initial(c), c);
  const CommonNoiseEstimate dup = prediction_split(p, c.P0, Rule::CI, c);
  const std::vector<CommonNoiseEstimate> inputs{dup, dup};
  const FusionOutcome f = fuse_inputs(inputs, Rule::CI, SymMatrix::scaled_identity(1, c.sigmaW2));
  EXPECT_LT((f.bound.mat() - p.cov.mat()).norm(), 1e-10 * p.cov.norm());
}

TEST(Fusion, FirstStepShrinksPrediction) {
  const ScenarioConfig c = ring4();
  const Schedule s = build_schedule(ring4(1, 1), Rule::ESCI);
  const NodeState p = predict(initial(c), c);
  EXPECT_LT(s.entries[0][0].fusedTrace, p.cov.trace());
  EXPECT_LT(s.splitDefect, 1e-10);
}

TEST(Schedule, RuleOrderingAtEveryFusion) {
  const ScenarioConfig c = ring4(30, 1);
  const Schedule ci = build_schedule(c, Rule::CI), sci = build_schedule(c, Rule::SCI), esci = build_schedule(c, Rule::ESCI);
  for (int k = 0; k < c.steps; ++k)
    for (int i = 0; i < c.node_count(); ++i) {
      EXPECT_LE(esci.entries[k][i].fusedTrace, sci.entries[k][i].fusedTrace * (1 + 1e-9));
      EXPECT_LE(sci.entries[k][i].fusedTrace, ci.entries[k][i].fusedTrace * (1 + 1e-9));
    }
}

// Without process noise the error is driven only by measurement noise, so it vanishes linearly in R.
TEST(MonteCarlo, NoiselessLimitHasZeroError) {
  for (double R : {1e-2, 1e-4, 1e-6}) {
    ScenarioConfig c = ring4(20, 1);
    c.sigmaW2 = 0.0;
    for (auto& n : c.nodes) n.R = R;
    const Schedule s = build_schedule(c, Rule::ESCI);
    const MonteCarloReport r = run_monte_carlo(c, s);
    const std::vector<double> v = exact_error_variance(c, s);
    for (double m : v) EXPECT_LT(m, 1.1 * R);
    for (double m : r.mse) EXPECT_LT(m, 20.0 * R);
  }
}

TEST(MonteCarlo, MatchesExactPropagation) {
  const ScenarioConfig c = ring4(25, 2000);
  for (Rule r : {Rule::SCI, Rule::ESCI}) {
    const Schedule s = build_schedule(c, r);
    const MonteCarloReport rep = run_monte_carlo(c, s);
    const std::vector<double> exact = exact_error_variance(c, s);
    for (std::size_t i = 0; i < exact.size(); ++i) {
      if (exact[i] == 0.0) continue;
      // Squared Gaussian errors: relative standard error √(2/trials).
      EXPECT_NEAR(rep.mse[i] / exact[i], 1.0, 5.0 * std::sqrt(2.0 / c.trials)) << i;
    }
  }
}

TEST(MonteCarlo, ExactErrorIsBelowBound) {
  const ScenarioConfig c = ring4(40, 1);
  for (Rule r : {Rule::CI, Rule::SCI, Rule::ESCI}) {
    const Schedule s = build_schedule(c, r);
    const std::vector<double> exact = exact_error_variance(c, s);
    for (int k = 1; k <= c.steps; ++k)
      for (int i = 0; i < c.node_count(); ++i) {
        const Mat b = s.entries[k - 1][i].posterior.mat();
        for (int j = 0; j < c.state_dim(); ++j)
          EXPECT_LE(exact[((k - 1) * c.node_count() + i) * c.state_dim() + j], b(j, j) * (1 + 1e-9));
      }
  }
}

TEST(MonteCarlo, ThreadCountDoesNotChangeResults) {
  const ScenarioConfig c = ring4(15, 230);
  const Schedule s = build_schedule(c, Rule::ESCI);
  const MonteCarloReport a = run_monte_carlo(c, s, 1), b = run_monte_carlo(c, s, 3);
  EXPECT_EQ(a.mse, b.mse);
  EXPECT_EQ(results_csv(std::span(&a, 1)), results_csv(std::span(&b, 1)));
}

TEST(MonteCarlo, CsvLayout) {
  const ScenarioConfig c = ring4(2, 3);
  const MonteCarloReport r = run_monte_carlo(c);
  const std::string csv = results_csv(std::span(&r, 1));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "rule,node,step,coord,bound_mean,mse");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 4 * 2 * 3);
  EXPECT_EQ(csv.substr(csv.find('\n') + 1, 11), "esci,1,1,0,");
}

TEST(MonteCarlo, SteadyStateRatioIsMeanOfCellRatios) {
  const ScenarioConfig c = ring4(10, 2);
  ScenarioConfig s = c;
  s.rule = Rule::SCI;
  const MonteCarloReport e = run_monte_carlo(c), q = run_monte_carlo(s);
  double sum = 0.0;
  for (int k = 5; k <= 10; ++k)
    for (int i = 0; i < 4; ++i) sum += e.cell(k, i, 0).bound / q.cell(k, i, 0).bound;
  EXPECT_NEAR(steady_state_ratio(e, q, 0, 5, 10), sum / 24.0, 1e-15);
  EXPECT_THROW(steady_state_ratio(e, q, 0, 0, 10), FusionError);
}

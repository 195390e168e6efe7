#include <gtest/gtest.h>

#include "esci/json_io.hpp"
#include "esci/number_format.hpp"
#include "test_support.hpp"

using namespace esci;

TEST(NumberFormat, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1.0), "1");
  EXPECT_EQ(format_number(-2.5e-300), "-2.5e-300");
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int k = 0; k < 1000; ++k) {
    const double v = u(rng);
    EXPECT_EQ(std::stod(format_number(v)), v);
  }
}

TEST(JsonMatrix, RoundTripIsExact) {
  std::mt19937_64 rng(47);
  const SymMatrix a = testkit::random_spd(3, rng);
  const SymMatrix b = sym_from_json(Json::parse(to_json(a).dump()), "a");
  EXPECT_EQ(a.mat(), b.mat());
  const Mat g = testkit::gaussian(2, 3, rng);
  EXPECT_EQ(mat_from_json(Json::parse(mat_to_json(g).dump()), "g"), g);
  EXPECT_DOUBLE_EQ(sym_from_json(Json(2.0), "s")(0, 0), 2.0);
}

TEST(JsonMatrix, SchemaErrors) {
  auto kind = [](const Json& j) {
    try {
      sym_from_json(j, "m");
    } catch (const FusionError& e) {
      return e.kind();
    }
    return ErrorKind::NonFinite;
  };
  EXPECT_EQ(kind(Json::parse(R"({"dim":2,"rows":[[1,0],[1,1]]})")), ErrorKind::Schema);
  EXPECT_EQ(kind(Json::parse(R"({"dim":3,"rows":[[1,0],[0,1]]})")), ErrorKind::Schema);
  EXPECT_EQ(kind(Json::parse(R"("x")")), ErrorKind::Schema);
}

TEST(Problem, FusionRoundTrip) {
  std::mt19937_64 rng(53);
  const FusionProblem p = testkit::random_fusion_problem(3, 2, rng);
  const LoadedProblem q = problem_from_json(Json::parse(problem_to_json(p).dump()));
  ASSERT_EQ(q.generic.count(), 3);
  EXPECT_EQ(q.generic.knownCentralCov.mat(), p.knownCentralCov.mat());
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(q.generic.estimates[i].mean, p.estimates[i].mean);
    EXPECT_EQ(q.generic.estimates[i].unknownCov.mat(), p.estimates[i].unknownCov.mat());
  }
}

TEST(Problem, CommonNoiseRoundTrip) {
  std::mt19937_64 rng(59);
  const CommonNoiseProblem p = testkit::random_common_noise_problem(2, 3, 2, rng);
  const LoadedProblem q = problem_from_json(Json::parse(problem_to_json(p).dump()));
  ASSERT_TRUE(q.common.has_value());
  EXPECT_EQ(q.common->noiseCov.mat(), p.noiseCov.mat());
  EXPECT_EQ(q.common->estimates[1].noiseGain, p.estimates[1].noiseGain);
  EXPECT_EQ(q.generic.knownCentralCov.mat(), p.assemble().knownCentralCov.mat());
}

TEST(Problem, KalmanSplitBuiltin) {
  const LoadedProblem fig1 = testkit::load_builtin("fig1");
  ASSERT_TRUE(fig1.common.has_value());
  // numpy oracle for node 1: predicted [[5, −1], [−1, 8]], position measured with R = 9.
  Mat unk(2, 2), ind(2, 2);
  unk << 0.4132653061224489, -0.596938775510204, -0.596938775510204, 3.8622448979591835;
  ind << 1.1479591836734695, -0.22959183673469388, -0.22959183673469388, 0.04591836734693877;
  EXPECT_LT((fig1.common->estimates[0].unknownCov.mat() - unk).norm(), 1e-14);
  EXPECT_LT((fig1.common->estimates[0].indepCov.mat() - ind).norm(), 1e-14);
  Mat m(2, 2);
  m << -(1 - 5.0 / 14.0), 0.0, -(1.0 / 14.0), -1.0;
  EXPECT_LT((fig1.common->estimates[0].noiseGain - m).norm(), 1e-14);
  const auto ci = fig1.ci_estimates();
  Mat post(2, 2);
  post << 3.214285714285714, -0.6428571428571428, -0.6428571428571428, 7.928571428571429;
  EXPECT_LT((ci[0].cov.mat() - post).norm(), 1e-13);
}

TEST(Problem, UnknownKindIsSchemaError) {
  try {
    problem_from_json(Json::parse(R"({"kind":"other"})"));
    FAIL();
  } catch (const FusionError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Schema);
  }
}

TEST(Scenario, DefaultsFromTimeStep) {
  const ScenarioConfig c = scenario_from_json(read_json_file(testkit::data_path("ring4.json")));
  EXPECT_EQ(c.F, ScenarioConfig::constant_acceleration_F(0.1));
  EXPECT_EQ(c.q, ScenarioConfig::constant_acceleration_q(0.1));
  EXPECT_EQ(c.P0.mat(), 10.0 * Mat::Identity(3, 3));
  EXPECT_EQ(c.node_count(), 4);
  EXPECT_DOUBLE_EQ(c.nodes[2].R, 0.25);
  EXPECT_EQ(c.rule, Rule::ESCI);
  EXPECT_EQ(c.seed, 42u);
}

TEST(Hash, CanonicalAndSensitive) {
  const Json a = Json::parse(R"({"b":1,"a":[1,2]})");
  const Json b = Json::parse(R"({"a":[1,2],"b":1})");
  const Json c = Json::parse(R"({"a":[1,2],"b":2})");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_NE(config_hash(a), config_hash(c));
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
  // FNV-1a of the compact dumps, computed independently.
  EXPECT_EQ(config_hash(Json("")), 0x07cc7607b4949e25ULL);
  EXPECT_EQ(config_hash(a), 0x30077cb0d8fc07beULL);
}

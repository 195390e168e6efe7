#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "esci/conservatism_oracle.hpp"
#include "esci/json_io.hpp"

namespace esci {

struct PropertyResult {
  std::string name;
  bool pass;
  double worst;      // worst observed margin, in the unit of the threshold
  double threshold;  // pass iff worst ≤ threshold (or the stated boolean holds)
  Json detail;
};

struct SuiteOptions {
  int samples = 10000;
  int directions = 20;
  int grid = 10001;
  int budget = 1000;
  std::uint64_t seed = 1;
  /// Test hook: scales every B_F by this factor before the conservatism check.
  double injectShrink = 1.0;
  /// Weights on estimator 1 for N = 2; other N use the centroid plus seeded interior points.
  std::vector<double> omegas{0.1, 0.3, 0.5, 0.7, 0.9};
};

/// max λ(K P_c Kᵀ − B_F)/‖B_F‖ over sampled admissible P_c, per rule and ω. SCI is skipped for
/// problems whose known part is not block-diagonal (SCI does not model them).
std::vector<PropertyResult> run_conservatism(const LoadedProblem& problem, const SuiteOptions& opts);

/// eval_g against a dense ω grid and against the witness, plus concavity of h.
std::vector<PropertyResult> run_theorem2(const LoadedProblem& problem, const SuiteOptions& opts);

/// Tightness certificate at the trace-optimal ESCI weight.
std::vector<PropertyResult> run_tightness(const LoadedProblem& problem, const SuiteOptions& opts);

std::vector<PropertyResult> run_falsify(const LoadedProblem& problem, const SuiteOptions& opts);

/// Max of h_x over `points` equispaced ω, refined by golden section next to the best point.
double grid_max_h(const PairOracle& oracle, const Vec& x, int points);

/// Unit directions for oracle checks, drawn from trial_rng(seed, 1000 + k).
std::vector<Vec> random_directions(int d, int count, std::uint64_t seed);

Json results_to_json(const std::vector<PropertyResult>& results);

}  // namespace esci

#pragma once

#include <functional>
#include <optional>
#include <string_view>

#include "esci/fusion_rules.hpp"

namespace esci {

enum class CostKind { Trace, LogDet, MaxEig };

std::optional<CostKind> parse_cost(std::string_view name);
std::string_view to_string(CostKind kind);

double evaluate_cost(const SymMatrix& bound, CostKind kind);

struct WeightSolution {
  Simplex omega;
  double cost;
  int evaluations;
};

/// Bound as a function of the weight on estimator 1 (the pair is (ω, 1 − ω)).
using PairEvaluator = std::function<SymMatrix(double)>;
using SimplexEvaluator = std::function<SymMatrix(const Simplex&)>;

struct PairOptions {
  int grid_points = 33;
  double tol = 1e-8;
};

/// Coarse grid scan, then golden-section refinement of the bracket around the best grid
/// point. Ties between equal costs resolve to the smaller ω.
WeightSolution optimize_pair(const PairEvaluator& fuse, CostKind cost, PairOptions opts = {});

struct SimplexOptions {
  int starts = 8;
  double rel_tol = 1e-8;
  double line_tol = 1e-9;
  int max_sweeps = 200;
  unsigned long long seed = 0x5eed5eedULL;
};

/// Multi-start coordinate descent over the stick-breaking parameterization of K^N.
/// The result is the lowest-cost point probed; global optimality is not claimed.
WeightSolution optimize_simplex(const SimplexEvaluator& fuse, CostKind cost, int n, SimplexOptions opts = {});

/// Stick-breaking map [0,1]^{N−1} → K^N.
Simplex stick_breaking(const Vec& t);

}  // namespace esci

#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "esci/counter_rng.hpp"
#include "esci/fusion_rules.hpp"
#include "esci/weight_opt.hpp"

namespace esci {

enum class Rule { CI, SCI, ESCI };

std::optional<Rule> parse_rule(std::string_view name);
std::string_view to_string(Rule rule);

struct SensorModel {
  Mat H;     // 1×d
  double R;  // measurement variance
};

struct ScenarioConfig {
  double dt = 0.1;
  Mat F;
  Vec q;
  double sigmaW2 = 100.0;
  std::vector<SensorModel> nodes;
  std::vector<std::vector<bool>> adjacency;
  int steps = 100;
  int trials = 2000;
  std::uint64_t seed = 42;
  Rule rule = Rule::ESCI;
  Vec x0;
  SymMatrix P0 = SymMatrix::identity(1);

  int state_dim() const { return static_cast<int>(F.rows()); }
  int node_count() const { return static_cast<int>(nodes.size()); }
  /// Q = σ_w² q qᵀ.
  SymMatrix process_cov() const;
  /// Neighbors of node i in increasing index order.
  std::vector<int> neighbors(int i) const;
  void validate() const;

  /// Constant-acceleration model: F = [[1, Δ, Δ²/2], [0, 1, Δ], [0, 0, 1]], q = (Δ³/6, Δ²/2, Δ).
  static Mat constant_acceleration_F(double dt);
  static Vec constant_acceleration_q(double dt);
};

struct Trajectory {
  std::vector<Vec> x;  // x(0) … x(steps)
  Mat z;               // node × step, column k−1 holds z(k)
};

/// Truth and measurements of one trial. The scalar process noise a(k) (x gets q·a) uses stream 0,
/// node i's measurement noise uses stream i + 1.
Trajectory simulate_truth(const ScenarioConfig& config, const NoiseField& noise, std::uint32_t trial);

struct NodeState {
  Vec mean;
  SymMatrix cov;
  SymMatrix lastMeasCov;
  Mat gain;  // Kalman gain of the last update (d×1); empty before any update
  /// Covariance held before the last update.
  std::optional<SymMatrix> priorCov;
};

NodeState predict(const NodeState& node, const ScenarioConfig& config);

/// Information-form update; lastMeasCov ← P⁽ᵃ⁾HᵀR⁻¹HP⁽ᵃ⁾, gain ← P⁽ᵃ⁾HᵀR⁻¹.
NodeState measurement_update(const NodeState& node, double z, const Mat& H, double R);

/// Fusion input held in common-noise form so all three rules share one representation:
/// CI keeps everything unknown, SCI adds the measurement term as independent, ESCI also
/// separates the shared process noise through Mᵢ = −(I − WᵢHᵢ)q with scalar noise σ_w².
CommonNoiseEstimate build_split(const NodeState& updated, const Mat& H, Rule rule, const ScenarioConfig& config);

/// The node's own prediction as fusion input: fully unknown for CI/SCI; for ESCI the fresh
/// process noise is isolated (unknown F P Fᵀ, M = −q).
CommonNoiseEstimate prediction_split(const NodeState& predicted, const SymMatrix& previousCov, Rule rule,
                                     const ScenarioConfig& config);

struct FusionOutcome {
  Vec mean;
  SymMatrix bound;
  Mat gain;
  Vec omega;
  double cost;
};

/// Fuses the inputs with the given rule, ω chosen by trace minimization.
FusionOutcome fuse_inputs(std::span<const CommonNoiseEstimate> inputs, Rule rule, const SymMatrix& noiseCov,
                          CostKind cost = CostKind::Trace);

/// The node's own prediction followed by the received neighbor splits.
NodeState fuse_neighborhood(const NodeState& predicted, const SymMatrix& previousCov,
                            std::span<const CommonNoiseEstimate> received, Rule rule,
                            const ScenarioConfig& config);

/// Per (step, node) quantities of the bound recursion, which does not depend on the data.
struct ScheduleEntry {
  std::vector<int> sources;  // own index first, then neighbors
  Mat fusionGain;            // d × d·|sources|
  Mat autoGain;              // d×1, broadcast estimate
  Mat finalGain;             // d×1, update of the fused estimate
  Vec omega;
  double fusedTrace;
  SymMatrix fusedBound;
  SymMatrix posterior;
};

struct Schedule {
  Rule rule;
  int steps;
  int nodes;
  std::vector<std::vector<ScheduleEntry>> entries;  // [step − 1][node]
  /// Largest |unknown + indep + MQMᵀ − P⁽ᵃ⁾| relative to ‖P⁽ᵃ⁾‖ over all splits.
  double splitDefect = 0.0;
};

Schedule build_schedule(const ScenarioConfig& config, Rule rule);

struct CellStats {
  double bound;
  double mse;
};

struct MonteCarloReport {
  Rule rule;
  int steps;
  int nodes;
  int dim;
  int trials;
  std::vector<double> bound;  // [((step − 1)·nodes + node)·dim + coord]
  std::vector<double> mse;
  Schedule schedule;

  CellStats cell(int step, int node, int coord) const {
    const std::size_t i = (static_cast<std::size_t>(step - 1) * nodes + node) * dim + coord;
    return CellStats{bound[i], mse[i]};
  }
};

/// Runs config.trials trials in fixed blocks; block sums are combined in block order, so the
/// result is bit-identical for any thread count.
MonteCarloReport run_monte_carlo(const ScenarioConfig& config, int threads = 1);
MonteCarloReport run_monte_carlo(const ScenarioConfig& config, const Schedule& schedule, int threads = 1);

/// True per-cell error variances of the schedule's linear estimator, propagated exactly through
/// the joint error covariance of all nodes (no sampling). Same layout as MonteCarloReport::mse.
std::vector<double> exact_error_variance(const ScenarioConfig& config, const Schedule& schedule);

/// Steady-state bound ratio between two reports: the mean over steps [from, to] and nodes of
/// the per-cell ratio, for one coordinate.
double steady_state_ratio(const MonteCarloReport& num, const MonteCarloReport& den, int coord, int from, int to);

/// Fraction of (node, step, coord) cells with mse ≤ bound.
double conservative_fraction(const MonteCarloReport& report);

std::string results_csv(std::span<const MonteCarloReport> reports);

}  // namespace esci

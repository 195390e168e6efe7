#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>

#include "esci/fusion_rules.hpp"
#include "esci/weight_opt.hpp"

namespace esci {

/// Per-(seed, trial) generator so sampling results do not depend on scheduling.
std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial);

/// Random orthogonal k×k matrix (Haar, via QR with sign correction).
Mat random_orthogonal(int k, std::mt19937_64& rng);

enum class SampleMode { Random, Extreme };

/// Draws centralized covariances from the admissible set: unknown diagonal blocks kept
/// exactly, cross blocks built from a correlation matrix with ‖Ω‖ ≤ 1, plus the known part.
class AdmissibleSampler {
 public:
  explicit AdmissibleSampler(FusionProblem problem);

  const FusionProblem& problem() const noexcept { return problem_; }

  /// N = 2 draws Ω = U·diag(s)·Vᵀ, s ~ U[−1, 1] (Random) or s ∈ {±1} (Extreme). Other N use
  /// a Gram construction Yᵢ Yⱼᵀ with row-orthonormal Yᵢ.
  BlockMatrix sample(std::mt19937_64& rng, SampleMode mode = SampleMode::Random) const;

  /// P_c(Ω) for N = 2. InvalidCorrelation when ‖Ω‖₂ > 1.
  BlockMatrix with_correlation(const Mat& omega) const;

 private:
  BlockMatrix assemble(const Mat& unknown) const;

  FusionProblem problem_;
  std::vector<SymMatrix> roots_;
};

/// Data for the N = 2 oracle with the Assumption-1 surrogate applied: when any of P̃₁⁽¹⁾,
/// P̃₂⁽¹⁾, P̃_c⁽²⁾ is singular all three get ε·I, ε = 1e−8·(largest spectral norm).
class PairOracle {
 public:
  explicit PairOracle(const FusionProblem& problem);

  int dim() const noexcept { return d_; }
  double epsilon() const noexcept { return eps_; }
  /// The (possibly regularized) problem the oracle works on.
  const FusionProblem& problem() const noexcept { return reg_; }

  /// y = B̄_c(ω)⁻¹ H x with B̄_c = B_c·D(ω); valid on the closed interval.
  Vec y(const Vec& x, double omega) const;
  double h(const Vec& x, double omega) const;
  double dh(const Vec& x, double omega) const;
  /// A_F(ω) = Hᵀ B_c(ω)⁻¹ H, including the endpoint limits.
  SymMatrix information(double omega) const;

 private:
  int d_;
  double eps_;
  FusionProblem reg_;
  Mat h_;
};

struct HDerivatives {
  double h;
  double dh;
  double d2h;
};

/// h_x(ω) = xᵀ A_F(ω) x, h′ = y₁ᵀP̃₁⁽¹⁾y₁ − y₂ᵀP̃₂⁽¹⁾y₂, h″ by central difference of h′
/// (one-sided within 1e−5 of an endpoint).
HDerivatives h_and_derivatives(const PairOracle& oracle, const Vec& x, double omega);
HDerivatives h_and_derivatives(const FusionProblem& problem, const Vec& x, double omega);

enum class GCase { LeftBoundary, RightBoundary, Interior };
std::string_view to_string(GCase c);

struct GEvaluation {
  Vec x;
  double value;
  GCase caseTag;
  double omega0;
};

/// g(x) = max over ω of h_x(ω), located through the sign of h′ (h is concave).
GEvaluation eval_g(const PairOracle& oracle, const Vec& x);
GEvaluation eval_g(const FusionProblem& problem, const Vec& x);

struct WitnessCovariance {
  BlockMatrix pCent;
  Mat omega;
  Vec x;
  double achieved;  // xᵀ Hᵀ P_c⁻¹ H x
  GEvaluation g;
};

/// Admissible P_c whose optimal fusion attains g(x) in direction x.
WitnessCovariance witness_covariance(const PairOracle& oracle, const Vec& x);
WitnessCovariance witness_covariance(const FusionProblem& problem, const Vec& x);

/// x ∈ V(A) ⇔ g(x) ≤ 1.
bool minimal_volume_membership(const PairOracle& oracle, const Vec& x);
bool minimal_volume_membership(const FusionProblem& problem, const Vec& x);

struct TightnessOptions {
  int directions_2d = 720;
  int directions_nd = 10000;
  double rel_tol = 1e-7;
};

struct TightnessResult {
  std::optional<Vec> certificate;
  int directions;
  /// Smallest relative gap (g(x) − xᵀA_F x)/g(x) seen over probed and refined directions.
  double best_gap;
};

/// Searches for x with g(x) = xᵀ A_F(ω₁) x. A sign change of h′_x(ω₁) between probed
/// directions is refined by bisection along the connecting arc.
TightnessResult tightness_certificate(const PairOracle& oracle, double omega1, TightnessOptions opts = {});
TightnessResult tightness_certificate(const FusionProblem& problem, double omega1, TightnessOptions opts = {});

/// Conservative bound attached to a fixed gain K = [K₁, K₂].
struct GainEnvelope {
  SymMatrix bound;       // conservative for every admissible P_c
  double kappa;          // mixing weight of the CI-type envelope
  double inflation;      // ≥ 1; applied when a sample exceeded the analytic envelope
  double sampled_lower;  // J lower bound: max over samples of J(K P_c Kᵀ)
};

struct FalsifyOptions {
  int budget = 1000;
  int samples = 1000;
  std::uint64_t seed = 1;
  CostKind cost = CostKind::Trace;
  double slack = 1e-3;
};

struct FalsifyReport {
  double esciCost;
  double esciOmega;
  double minTrialCost;
  double minSampledLower;
  double maxInflation;
  int trials;
  Mat bestGain;
  bool undercut;  // some trial beat ESCI by more than the relative slack
};

/// Envelope bound for gain K: min over κ of J(K₁P̃₁⁽¹⁾K₁ᵀ/κ + K₂P̃₂⁽¹⁾K₂ᵀ/(1−κ) + K P̃_c⁽²⁾ Kᵀ),
/// checked against the sample pool and extreme rank-one admissible covariances.
GainEnvelope gain_envelope(const AdmissibleSampler& sampler, const Mat& gain, CostKind cost,
                           std::span<const BlockMatrix> pool);

/// Random search over unbiased gains K = [I − W, W] trying to beat the optimized ESCI cost.
FalsifyReport falsify_optimality(const FusionProblem& problem, FalsifyOptions opts = {});

}  // namespace esci

#pragma once

#include <optional>
#include <vector>

#include "esci/matrix_core.hpp"

namespace esci {

/// Point on the unit simplex K^N: entries ≥ 0 summing to one within 1e−12.
class Simplex {
 public:
  explicit Simplex(Vec w);

  static Simplex centroid(int n);
  static Simplex vertex(int n, int i);
  /// (ω, 1 − ω) for two-estimator fusion.
  static Simplex pair(double omega);

  int size() const noexcept { return static_cast<int>(w_.size()); }
  double operator[](int i) const { return w_(i); }
  const Vec& values() const noexcept { return w_; }
  bool is_interior() const { return (w_.array() > 0.0).all(); }

 private:
  Vec w_;
};

struct Estimate {
  Vec mean;
  SymMatrix cov;
};

/// Estimate whose error is split into a component correlated to an unknown degree
/// (unknownCov) and a component with known second moments (knownCov).
struct SplitEstimate {
  Vec mean;
  SymMatrix unknownCov;
  SymMatrix knownCov;

  SymMatrix total_cov() const { return unknownCov + knownCov; }
};

/// N split estimates plus the full known centralized covariance of the known components.
/// crossCov, when set, is E[x̃⁽¹⁾ x̃⁽²⁾ᵀ] over the stacked errors and must be removed
/// with decorrelate() before fusing.
struct FusionProblem {
  std::vector<SplitEstimate> estimates;
  BlockMatrix knownCentralCov;
  std::optional<Mat> crossCov;

  int state_dim() const { return estimates.empty() ? 0 : static_cast<int>(estimates.front().mean.size()); }
  int count() const { return static_cast<int>(estimates.size()); }

  /// Throws on inconsistent dimensions, non-PSD parts, or diagonal blocks that disagree
  /// with the per-estimate knownCov.
  void validate() const;

  /// Problem whose known part is block-diagonal with the given per-estimate blocks.
  static FusionProblem independent(std::vector<SplitEstimate> estimates);
};

struct CommonNoiseEstimate {
  Vec mean;
  SymMatrix unknownCov;
  SymMatrix indepCov;
  Mat noiseGain;  // d×q
};

/// Known components induced by one shared noise: x̃ᵢ = x̃ᵢ⁽¹⁾ + x̃ᵢ^(ind) + Mᵢ w, Cov(w) = Q.
struct CommonNoiseProblem {
  std::vector<CommonNoiseEstimate> estimates;
  SymMatrix noiseCov;

  int state_dim() const { return estimates.empty() ? 0 : static_cast<int>(estimates.front().mean.size()); }
  int count() const { return static_cast<int>(estimates.size()); }
  void validate() const;

  /// Generic form with P̃_c⁽²⁾ = diag(P̃ᵢ^(ind)) + M_c Q M_cᵀ.
  FusionProblem assemble() const;
  /// SCI view: the common-noise term is folded into the unknown component.
  std::vector<SplitEstimate> sci_split() const;
  /// CI view: everything unknown.
  std::vector<Estimate> ci_estimates() const;
};

struct FusedResult {
  Vec mean;
  SymMatrix bound;
  Mat gain;     // d × Nd
  Vec weights;  // empty for optimal fusion
};

FusedResult optimal_fusion(const BlockMatrix& pCent, std::span<const Vec> means);

FusedResult information_fusion(std::span<const Estimate> estimates);

FusedResult ci_fuse(std::span<const Estimate> estimates, const Simplex& omega);

FusedResult sci_fuse(std::span<const SplitEstimate> estimates, const Simplex& omega);

/// B_c(ω) = diag(P̃ᵢ⁽¹⁾/ωᵢ) + P̃_c⁽²⁾ for interior ω.
BlockMatrix esci_centralized_bound(const FusionProblem& problem, const Simplex& omega);

/// ESCI rule. For ωᵢ = 0 with nonzero P̃ᵢ⁽¹⁾ the estimator is dropped from both the
/// unknown diagonal and P̃_c⁽²⁾ (its limit as ωᵢ → 0); with P̃ᵢ⁽¹⁾ = 0 it is kept.
FusedResult esci_fuse(const FusionProblem& problem, const Simplex& omega);

/// Woodbury form of ESCI for common-noise problems (N + 2 inversions of size d or q).
/// Boundary weights follow the same drop rule as esci_fuse.
FusedResult esci_fuse_common_noise(const CommonNoiseProblem& problem, const Simplex& omega);

/// Removes the cross-covariance between unknown and known components.
FusionProblem decorrelate(const FusionProblem& problem);

/// ‖K·H − I‖_max, zero for an unbiased gain.
double unbiasedness_defect(const Mat& gain, int n, int d);

}  // namespace esci

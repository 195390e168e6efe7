#include "esci/fusion_rules.hpp"

#include <cmath>
#include <string>

namespace esci {

namespace {

Vec stack_means(std::span<const Vec> means) {
  const int d = static_cast<int>(means.front().size());
  Vec x(d * static_cast<int>(means.size()));
  for (std::size_t i = 0; i < means.size(); ++i) {
    if (means[i].size() != d) fail(ErrorKind::DimensionMismatch, "estimate means differ in size");
    x.segment(static_cast<int>(i) * d, d) = means[i];
  }
  return x;
}

void check_weights(const Simplex& omega, int n) {
  if (omega.size() != n)
    fail(ErrorKind::DimensionMismatch,
         "weight vector has " + std::to_string(omega.size()) + " entries for " + std::to_string(n) + " estimates");
}

// Sum of ωᵢ·Λᵢ information terms, skipping ωᵢ = 0. `info[i]` is the per-estimate
// precision Λᵢ (already including any ω-dependence).
FusedResult combine_information(std::span<const Vec> means, const std::vector<std::optional<Mat>>& info,
                                const Simplex& omega) {
  const int n = static_cast<int>(means.size());
  const int d = static_cast<int>(means.front().size());
  Mat total = Mat::Zero(d, d);
  Vec weighted = Vec::Zero(d);
  bool any = false;
  for (int i = 0; i < n; ++i) {
    if (!info[i]) continue;
    total += *info[i];
    weighted += *info[i] * means[i];
    any = true;
  }
  if (!any) fail(ErrorKind::DegenerateWeights, "no estimate carries positive weight");
  const SymMatrix bound = spd_inverse(SymMatrix(total));
  Mat gain = Mat::Zero(d, n * d);
  for (int i = 0; i < n; ++i)
    if (info[i]) gain.block(0, i * d, d, d) = bound.mat() * *info[i];
  return FusedResult{bound.mat() * weighted, bound, std::move(gain), omega.values()};
}

}  // namespace

// ---------------------------------------------------------------------------
// Simplex

Simplex::Simplex(Vec w) : w_(std::move(w)) {
  if (w_.size() < 1) fail(ErrorKind::InvalidArgument, "empty weight vector");
  if (!w_.allFinite()) fail(ErrorKind::NonFinite, "weights must be finite");
  if ((w_.array() < 0.0).any()) fail(ErrorKind::InvalidArgument, "weights must be non-negative");
  const double s = w_.sum();
  if (s == 0.0) fail(ErrorKind::DegenerateWeights, "all weights are zero");
  if (std::abs(s - 1.0) > 1e-12) fail(ErrorKind::InvalidArgument, "weights must sum to one");
}

Simplex Simplex::centroid(int n) { return Simplex(Vec::Constant(n, 1.0 / n)); }

Simplex Simplex::vertex(int n, int i) {
  Vec w = Vec::Zero(n);
  w(i) = 1.0;
  return Simplex(std::move(w));
}

Simplex Simplex::pair(double omega) {
  if (!(omega >= 0.0 && omega <= 1.0)) fail(ErrorKind::InvalidArgument, "pair weight must lie in [0, 1]");
  Vec w(2);
  w << omega, 1.0 - omega;
  return Simplex(std::move(w));
}

// ---------------------------------------------------------------------------
// Problem types

void FusionProblem::validate() const {
  if (estimates.empty()) fail(ErrorKind::InvalidArgument, "fusion problem has no estimates");
  const int d = state_dim();
  const int n = count();
  if (knownCentralCov.block_dim() != d || knownCentralCov.block_count() != n)
    fail(ErrorKind::DimensionMismatch, "knownCentralCov is not N*d square");
  for (int i = 0; i < n; ++i) {
    const auto& e = estimates[i];
    if (e.mean.size() != d || e.unknownCov.dim() != d || e.knownCov.dim() != d)
      fail(ErrorKind::DimensionMismatch, "estimate " + std::to_string(i) + " has inconsistent dimensions");
    if (!e.unknownCov.is_psd()) fail(ErrorKind::NotPSD, "unknownCov of estimate " + std::to_string(i));
    const Mat diff = knownCentralCov.block(i, i) - e.knownCov.mat();
    if (diff.cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, e.knownCov.mat().cwiseAbs().maxCoeff()))
      fail(ErrorKind::InvalidArgument, "knownCentralCov diagonal block " + std::to_string(i) + " != knownCov");
  }
  if (!knownCentralCov.full().is_psd()) fail(ErrorKind::NotPSD, "knownCentralCov");
  if (crossCov && (crossCov->rows() != n * d || crossCov->cols() != n * d))
    fail(ErrorKind::DimensionMismatch, "crossCov is not N*d square");
}

FusionProblem FusionProblem::independent(std::vector<SplitEstimate> estimates) {
  std::vector<SymMatrix> blocks;
  blocks.reserve(estimates.size());
  for (const auto& e : estimates) blocks.push_back(e.knownCov);
  auto known = BlockMatrix::block_diagonal(blocks);
  return FusionProblem{std::move(estimates), std::move(known), std::nullopt};
}

void CommonNoiseProblem::validate() const {
  if (estimates.empty()) fail(ErrorKind::InvalidArgument, "fusion problem has no estimates");
  const int d = state_dim();
  const int q = noiseCov.dim();
  if (!noiseCov.is_spd()) fail(ErrorKind::SingularMatrix, "noiseCov must be SPD");
  for (int i = 0; i < count(); ++i) {
    const auto& e = estimates[i];
    if (e.mean.size() != d || e.unknownCov.dim() != d || e.indepCov.dim() != d || e.noiseGain.rows() != d ||
        e.noiseGain.cols() != q)
      fail(ErrorKind::DimensionMismatch, "estimate " + std::to_string(i) + " has inconsistent dimensions");
    require_finite(e.noiseGain, "noiseGain");
    if (!e.unknownCov.is_psd()) fail(ErrorKind::NotPSD, "unknownCov of estimate " + std::to_string(i));
    if (!e.indepCov.is_psd()) fail(ErrorKind::NotPSD, "indepCov of estimate " + std::to_string(i));
  }
}

FusionProblem CommonNoiseProblem::assemble() const {
  validate();
  const int d = state_dim();
  const int n = count();
  const int q = noiseCov.dim();
  Mat mc(n * d, q);
  Mat known = Mat::Zero(n * d, n * d);
  for (int i = 0; i < n; ++i) {
    mc.block(i * d, 0, d, q) = estimates[i].noiseGain;
    known.block(i * d, i * d, d, d) = estimates[i].indepCov.mat();
  }
  known += mc * noiseCov.mat() * mc.transpose();
  BlockMatrix kc(d, n, known);
  std::vector<SplitEstimate> split;
  split.reserve(n);
  for (int i = 0; i < n; ++i)
    split.push_back(SplitEstimate{estimates[i].mean, estimates[i].unknownCov, kc.diagonal_block(i)});
  return FusionProblem{std::move(split), std::move(kc), std::nullopt};
}

std::vector<SplitEstimate> CommonNoiseProblem::sci_split() const {
  std::vector<SplitEstimate> out;
  out.reserve(estimates.size());
  for (const auto& e : estimates) {
    const SymMatrix common(e.noiseGain * noiseCov.mat() * e.noiseGain.transpose());
    out.push_back(SplitEstimate{e.mean, e.unknownCov + common, e.indepCov});
  }
  return out;
}

std::vector<Estimate> CommonNoiseProblem::ci_estimates() const {
  std::vector<Estimate> out;
  for (const auto& s : sci_split()) out.push_back(Estimate{s.mean, s.total_cov()});
  return out;
}

// ---------------------------------------------------------------------------
// Fusion rules

FusedResult optimal_fusion(const BlockMatrix& pCent, std::span<const Vec> means) {
  const int n = pCent.block_count();
  const int d = pCent.block_dim();
  if (static_cast<int>(means.size()) != n) fail(ErrorKind::DimensionMismatch, "optimal_fusion: mean count");
  const Vec x = stack_means(means);
  const Mat h = build_centralized_H(n, d);
  const Mat pinv_h = spd_solve(pCent.full(), h);  // P_c⁻¹ H
  const SymMatrix bound = spd_inverse(SymMatrix(h.transpose() * pinv_h));
  Mat gain = bound.mat() * pinv_h.transpose();
  Vec mean = gain * x;
  return FusedResult{std::move(mean), bound, std::move(gain), Vec()};
}

FusedResult information_fusion(std::span<const Estimate> estimates) {
  if (estimates.empty()) fail(ErrorKind::InvalidArgument, "information_fusion of nothing");
  std::vector<Vec> means;
  std::vector<std::optional<Mat>> info;
  for (const auto& e : estimates) {
    if (e.cov.dim() != e.mean.size()) fail(ErrorKind::DimensionMismatch, "estimate mean/cov sizes");
    means.push_back(e.mean);
    info.emplace_back(spd_inverse(e.cov).mat());
  }
  auto r = combine_information(means, info, Simplex::centroid(static_cast<int>(estimates.size())));
  r.weights = Vec();
  return r;
}

FusedResult ci_fuse(std::span<const Estimate> estimates, const Simplex& omega) {
  if (estimates.empty()) fail(ErrorKind::InvalidArgument, "ci_fuse of nothing");
  check_weights(omega, static_cast<int>(estimates.size()));
  std::vector<Vec> means;
  std::vector<std::optional<Mat>> info;
  for (int i = 0; i < omega.size(); ++i) {
    const auto& e = estimates[i];
    if (e.cov.dim() != e.mean.size()) fail(ErrorKind::DimensionMismatch, "estimate mean/cov sizes");
    means.push_back(e.mean);
    if (omega[i] > 0.0)
      info.emplace_back(omega[i] * spd_inverse(e.cov).mat());
    else
      info.emplace_back(std::nullopt);
  }
  return combine_information(means, info, omega);
}

FusedResult sci_fuse(std::span<const SplitEstimate> estimates, const Simplex& omega) {
  if (estimates.empty()) fail(ErrorKind::InvalidArgument, "sci_fuse of nothing");
  check_weights(omega, static_cast<int>(estimates.size()));
  std::vector<Vec> means;
  std::vector<std::optional<Mat>> info;
  for (int i = 0; i < omega.size(); ++i) {
    const auto& e = estimates[i];
    means.push_back(e.mean);
    if (omega[i] > 0.0)
      info.emplace_back(omega[i] * spd_inverse(e.unknownCov + omega[i] * e.knownCov).mat());
    else
      info.emplace_back(std::nullopt);
  }
  return combine_information(means, info, omega);
}

BlockMatrix esci_centralized_bound(const FusionProblem& problem, const Simplex& omega) {
  problem.validate();
  check_weights(omega, problem.count());
  if (!omega.is_interior()) fail(ErrorKind::BoundaryWeight, "centralized bound needs interior weights");
  const int d = problem.state_dim();
  Mat b = problem.knownCentralCov.mat();
  for (int i = 0; i < problem.count(); ++i)
    b.block(i * d, i * d, d, d) += problem.estimates[i].unknownCov.mat() / omega[i];
  return BlockMatrix(d, problem.count(), b);
}

FusedResult esci_fuse(const FusionProblem& problem, const Simplex& omega) {
  problem.validate();
  const int n = problem.count();
  const int d = problem.state_dim();
  check_weights(omega, n);
  if (problem.crossCov && !problem.crossCov->isZero(0.0))
    fail(ErrorKind::InvalidArgument, "problem carries a cross-covariance; apply decorrelate() first");

  std::vector<int> keep;
  for (int i = 0; i < n; ++i)
    if (omega[i] > 0.0 || problem.estimates[i].unknownCov.is_zero()) keep.push_back(i);
  if (keep.empty()) fail(ErrorKind::DegenerateWeights, "no estimate remains after dropping zero weights");

  const int m = static_cast<int>(keep.size());
  Mat bc = problem.knownCentralCov.select(keep).mat();
  Vec x(m * d);
  for (int a = 0; a < m; ++a) {
    const int i = keep[a];
    if (omega[i] > 0.0) bc.block(a * d, a * d, d, d) += problem.estimates[i].unknownCov.mat() / omega[i];
    x.segment(a * d, d) = problem.estimates[i].mean;
  }
  const Mat h = build_centralized_H(m, d);
  const Mat ainv_h = spd_solve(SymMatrix(bc), h);  // B_c⁻¹ H
  const SymMatrix bound = spd_inverse(SymMatrix(h.transpose() * ainv_h));
  const Mat kept_gain = bound.mat() * ainv_h.transpose();
  Mat gain = Mat::Zero(d, n * d);
  for (int a = 0; a < m; ++a) gain.block(0, keep[a] * d, d, d) = kept_gain.block(0, a * d, d, d);
  Vec mean = kept_gain * x;
  return FusedResult{std::move(mean), bound, std::move(gain), omega.values()};
}

FusedResult esci_fuse_common_noise(const CommonNoiseProblem& problem, const Simplex& omega) {
  problem.validate();
  const int n = problem.count();
  const int d = problem.state_dim();
  const int q = problem.noiseCov.dim();
  check_weights(omega, n);

  // Per kept estimate: ωᵢ P'ᵢ⁻¹ and ωᵢ P'ᵢ⁻¹ Mᵢ.
  std::vector<int> keep;
  std::vector<Mat> wpinv, wpinv_m;
  Mat info_sum = Mat::Zero(d, d);
  Mat s0 = spd_inverse(problem.noiseCov).mat();
  Mat s1 = Mat::Zero(d, q);
  for (int i = 0; i < n; ++i) {
    const auto& e = problem.estimates[i];
    const double w = omega[i];
    if (w == 0.0 && !e.unknownCov.is_zero()) continue;
    if (w == 0.0) fail(ErrorKind::SingularMatrix, "zero weight on an estimate with no unknown component");
    const Mat a = w * spd_inverse(e.unknownCov + w * e.indepCov).mat();
    const Mat am = a * e.noiseGain;
    info_sum += a;
    s0 += e.noiseGain.transpose() * am;
    s1 += am;
    keep.push_back(i);
    wpinv.push_back(a);
    wpinv_m.push_back(am);
  }
  if (keep.empty()) fail(ErrorKind::DegenerateWeights, "no estimate remains after dropping zero weights");

  const SymMatrix s0sym(s0);
  const Mat s0inv_s1t = spd_solve(s0sym, s1.transpose());  // S₀⁻¹S₁ᵀ
  const SymMatrix bound = spd_inverse(SymMatrix(info_sum - s1 * s0inv_s1t));
  Mat gain = Mat::Zero(d, n * d);
  Vec mean = Vec::Zero(d);
  for (std::size_t a = 0; a < keep.size(); ++a) {
    const int i = keep[a];
    // ωᵢ (I − S₁S₀⁻¹Mᵢᵀ) P'ᵢ⁻¹ = ωᵢP'ᵢ⁻¹ − S₁S₀⁻¹(ωᵢ P'ᵢ⁻¹ Mᵢ)ᵀ
    const Mat block = bound.mat() * (wpinv[a] - s0inv_s1t.transpose() * wpinv_m[a].transpose());
    gain.block(0, i * d, d, d) = block;
    mean += block * problem.estimates[i].mean;
  }
  return FusedResult{std::move(mean), bound, std::move(gain), omega.values()};
}

FusionProblem decorrelate(const FusionProblem& problem) {
  problem.validate();
  if (!problem.crossCov) return problem;
  const int n = problem.count();
  const int d = problem.state_dim();
  const Mat& p12 = *problem.crossCov;
  const SymMatrix& p2 = problem.knownCentralCov.full();
  // C = P⁽¹²⁾ (P⁽²⁾)⁻¹, computed as (P⁽²⁾⁻¹ P⁽²¹⁾)ᵀ.
  const Mat c = spd_solve(p2, p12.transpose()).transpose();
  const Mat p1_shift = c * p12.transpose() + p12 * c.transpose() - c * p2.mat() * c.transpose();
  const Mat ic = Mat::Identity(n * d, n * d) + c;
  const BlockMatrix known(d, n, ic * p2.mat() * ic.transpose());

  const Mat residual_cross = (p12 - c * p2.mat()) * ic.transpose();
  if (residual_cross.cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, p12.cwiseAbs().maxCoeff()))
    fail(ErrorKind::SingularMatrix, "decorrelation left a residual cross-covariance");

  FusionProblem out{{}, known, std::nullopt};
  out.estimates.reserve(n);
  for (int i = 0; i < n; ++i) {
    const auto& e = problem.estimates[i];
    const SymMatrix unknown(e.unknownCov.mat() - p1_shift.block(i * d, i * d, d, d));
    out.estimates.push_back(SplitEstimate{e.mean, unknown, known.diagonal_block(i)});
  }
  return out;
}

double unbiasedness_defect(const Mat& gain, int n, int d) {
  return (gain * build_centralized_H(n, d) - Mat::Identity(d, d)).cwiseAbs().maxCoeff();
}

}  // namespace esci

#include "esci/conservatism_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "esci/counter_rng.hpp"

namespace esci {

namespace {

constexpr double kDiffStep = 1e-5;
constexpr double kRootTol = 1e-12;
constexpr double kWitnessTol = 1e-7;
constexpr double kCorrTol = 1e-12;

Mat gaussian(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  Mat m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = n01(rng);
  return m;
}

double max_eig(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(a.rows() - 1);
}

void require_pair(const FusionProblem& p) {
  p.validate();
  if (p.count() != 2) fail(ErrorKind::InvalidArgument, "this oracle needs exactly two estimates");
  if (p.crossCov && !p.crossCov->isZero(0.0))
    fail(ErrorKind::InvalidArgument, "problem carries a cross-covariance; apply decorrelate() first");
}

}  // namespace

std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(trial + 0x632BE59BD9B4E019ULL)));
}

Mat random_orthogonal(int k, std::mt19937_64& rng) {
  const Mat g = gaussian(k, k, rng);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ();
  const Mat r = qr.matrixQR();
  for (int j = 0; j < k; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

// ---------------------------------------------------------------------------
// AdmissibleSampler

AdmissibleSampler::AdmissibleSampler(FusionProblem problem) : problem_(std::move(problem)) {
  problem_.validate();
  if (problem_.crossCov && !problem_.crossCov->isZero(0.0))
    fail(ErrorKind::InvalidArgument, "sampler needs a decorrelated problem");
  for (const auto& e : problem_.estimates) roots_.push_back(psd_sqrt(e.unknownCov));
}

BlockMatrix AdmissibleSampler::assemble(const Mat& unknown) const {
  BlockMatrix pc(problem_.state_dim(), problem_.count(), unknown + problem_.knownCentralCov.mat());
  if (!pc.full().is_psd()) fail(ErrorKind::NotPSD, "sampled centralized covariance is not PSD");
  return pc;
}

BlockMatrix AdmissibleSampler::with_correlation(const Mat& omega) const {
  if (problem_.count() != 2) fail(ErrorKind::InvalidArgument, "explicit correlation needs two estimates");
  const int d = problem_.state_dim();
  if (omega.rows() != d || omega.cols() != d) fail(ErrorKind::DimensionMismatch, "correlation matrix size");
  require_finite(omega, "correlation matrix");
  if (spectral_norm(omega) > 1.0 + kCorrTol) fail(ErrorKind::InvalidCorrelation, "correlation matrix norm exceeds 1");
  Mat u(2 * d, 2 * d);
  u.topLeftCorner(d, d) = problem_.estimates[0].unknownCov.mat();
  u.bottomRightCorner(d, d) = problem_.estimates[1].unknownCov.mat();
  const Mat c = roots_[0].mat() * omega * roots_[1].mat();
  u.topRightCorner(d, d) = c;
  u.bottomLeftCorner(d, d) = c.transpose();
  return assemble(u);
}

BlockMatrix AdmissibleSampler::sample(std::mt19937_64& rng, SampleMode mode) const {
  const int n = problem_.count();
  const int d = problem_.state_dim();
  if (n == 2) {
    const Mat u = random_orthogonal(d, rng);
    const Mat v = random_orthogonal(d, rng);
    Vec s(d);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int i = 0; i < d; ++i) {
      s(i) = uni(rng);
      if (mode == SampleMode::Extreme) s(i) = s(i) < 0.0 ? -1.0 : 1.0;
    }
    return with_correlation(u * s.asDiagonal() * v.transpose());
  }
  // Yᵢ: d rows of an m×m orthogonal matrix, m between d (fully correlated) and N·d.
  int m = d;
  if (mode == SampleMode::Random) {
    std::uniform_int_distribution<int> pick(d, n * d);
    m = pick(rng);
  }
  Mat stack(n * d, m);
  for (int i = 0; i < n; ++i)
    stack.block(i * d, 0, d, m) = roots_[i].mat() * random_orthogonal(m, rng).topRows(d);
  Mat u = stack * stack.transpose();
  // Diagonal blocks are exact copies of the unknown covariances.
  for (int i = 0; i < n; ++i) u.block(i * d, i * d, d, d) = problem_.estimates[i].unknownCov.mat();
  return assemble(u);
}

// ---------------------------------------------------------------------------
// PairOracle

PairOracle::PairOracle(const FusionProblem& problem) : d_(problem.state_dim()), eps_(0.0), reg_(problem) {
  require_pair(problem);
  const auto& p1a = problem.estimates[0].unknownCov;
  const auto& p1b = problem.estimates[1].unknownCov;
  const auto& p2 = problem.knownCentralCov.full();
  if (!p1a.is_spd() || !p1b.is_spd() || !p2.is_spd()) {
    eps_ = 1e-8 * std::max({p1a.norm(), p1b.norm(), p2.norm()});
    if (eps_ == 0.0) eps_ = 1e-8;
    for (auto& e : reg_.estimates) {
      e.unknownCov = e.unknownCov + SymMatrix::scaled_identity(d_, eps_);
      e.knownCov = e.knownCov + SymMatrix::scaled_identity(d_, eps_);
    }
    reg_.knownCentralCov = BlockMatrix(d_, 2, p2.mat() + eps_ * Mat::Identity(2 * d_, 2 * d_));
  }
  h_ = build_centralized_H(2, d_);
}

namespace {

Mat bar_bc(const FusionProblem& p, int d, double w) {
  const double wb = 1.0 - w;
  const Mat& p2 = p.knownCentralCov.mat();
  Mat b(2 * d, 2 * d);
  b.topLeftCorner(d, d) = p.estimates[0].unknownCov.mat() + w * p2.topLeftCorner(d, d);
  b.topRightCorner(d, d) = wb * p2.topRightCorner(d, d);
  b.bottomLeftCorner(d, d) = w * p2.bottomLeftCorner(d, d);
  b.bottomRightCorner(d, d) = p.estimates[1].unknownCov.mat() + wb * p2.bottomRightCorner(d, d);
  return b;
}

void check_omega(double w) {
  if (!(w >= 0.0 && w <= 1.0)) fail(ErrorKind::InvalidArgument, "ω must lie in [0, 1]");
}

}  // namespace

Vec PairOracle::y(const Vec& x, double omega) const {
  check_omega(omega);
  if (x.size() != d_) fail(ErrorKind::DimensionMismatch, "direction has wrong size");
  return bar_bc(reg_, d_, omega).partialPivLu().solve(h_ * x);
}

double PairOracle::h(const Vec& x, double omega) const {
  const Vec yy = y(x, omega);
  return omega * x.dot(yy.head(d_)) + (1.0 - omega) * x.dot(yy.tail(d_));
}

double PairOracle::dh(const Vec& x, double omega) const {
  const Vec yy = y(x, omega);
  const Vec y1 = yy.head(d_), y2 = yy.tail(d_);
  return y1.dot(reg_.estimates[0].unknownCov.mat() * y1) - y2.dot(reg_.estimates[1].unknownCov.mat() * y2);
}

SymMatrix PairOracle::information(double omega) const {
  check_omega(omega);
  const Mat yy = bar_bc(reg_, d_, omega).partialPivLu().solve(h_);
  return SymMatrix(omega * yy.topRows(d_) + (1.0 - omega) * yy.bottomRows(d_));
}

// ---------------------------------------------------------------------------
// h, g, witness

HDerivatives h_and_derivatives(const PairOracle& oracle, const Vec& x, double omega) {
  check_omega(omega);
  double lo = omega - kDiffStep, hi = omega + kDiffStep;
  if (lo < 0.0) {
    lo = omega;
    hi = omega + 2 * kDiffStep;
  } else if (hi > 1.0) {
    hi = omega;
    lo = omega - 2 * kDiffStep;
  }
  const double d2 = (oracle.dh(x, hi) - oracle.dh(x, lo)) / (hi - lo);
  return HDerivatives{oracle.h(x, omega), oracle.dh(x, omega), d2};
}

HDerivatives h_and_derivatives(const FusionProblem& problem, const Vec& x, double omega) {
  return h_and_derivatives(PairOracle(problem), x, omega);
}

std::string_view to_string(GCase c) {
  switch (c) {
    case GCase::LeftBoundary: return "left-boundary";
    case GCase::RightBoundary: return "right-boundary";
    case GCase::Interior: return "interior";
  }
  return "?";
}

GEvaluation eval_g(const PairOracle& oracle, const Vec& x) {
  if (x.size() != oracle.dim()) fail(ErrorKind::DimensionMismatch, "direction has wrong size");
  if (x.isZero(0.0)) fail(ErrorKind::InvalidArgument, "g is evaluated on nonzero directions");
  if (oracle.dh(x, 0.0) < 0.0) return GEvaluation{x, oracle.h(x, 0.0), GCase::LeftBoundary, 0.0};
  if (oracle.dh(x, 1.0) > 0.0) return GEvaluation{x, oracle.h(x, 1.0), GCase::RightBoundary, 1.0};
  double lo = 0.0, hi = 1.0;
  while (hi - lo > kRootTol) {
    const double mid = 0.5 * (lo + hi);
    if (oracle.dh(x, mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  const double w0 = 0.5 * (lo + hi);
  return GEvaluation{x, oracle.h(x, w0), GCase::Interior, w0};
}

GEvaluation eval_g(const FusionProblem& problem, const Vec& x) { return eval_g(PairOracle(problem), x); }

WitnessCovariance witness_covariance(const PairOracle& oracle, const Vec& x) {
  const GEvaluation g = eval_g(oracle, x);
  const int d = oracle.dim();
  const auto& p = oracle.problem();
  const Vec yy = oracle.y(x, g.omega0);
  const Vec y1 = yy.head(d), y2 = yy.tail(d);
  const double a = y1.dot(p.estimates[0].unknownCov.mat() * y1);
  const double b = y2.dot(p.estimates[1].unknownCov.mat() * y2);
  double den = 0.0;
  switch (g.caseTag) {
    case GCase::Interior: den = std::sqrt(a * b); break;
    case GCase::LeftBoundary: den = b; break;
    case GCase::RightBoundary: den = a; break;
  }
  if (!(den > 0.0) || !std::isfinite(den)) fail(ErrorKind::WitnessFailed, "degenerate witness normalization");
  const SymMatrix s1 = psd_sqrt(p.estimates[0].unknownCov);
  const SymMatrix s2 = psd_sqrt(p.estimates[1].unknownCov);
  Mat omega = s1.mat() * y1 * y2.transpose() * s2.mat() / den;
  const double norm = spectral_norm(omega);
  if (norm > 1.0 + 1e-9) fail(ErrorKind::WitnessFailed, "witness correlation has norm " + std::to_string(norm));
  if (norm > 1.0) omega /= norm;

  const AdmissibleSampler sampler(p);
  BlockMatrix pc = sampler.with_correlation(omega);
  const Mat h = build_centralized_H(2, d);
  const Vec hx = h * x;
  const double achieved = hx.dot(spd_solve(pc.full(), hx).col(0));
  if (std::abs(achieved - g.value) > kWitnessTol * std::abs(g.value))
    fail(ErrorKind::WitnessFailed, "witness achieves " + std::to_string(achieved) + " but g(x) = " +
                                       std::to_string(g.value));
  return WitnessCovariance{std::move(pc), std::move(omega), x, achieved, g};
}

WitnessCovariance witness_covariance(const FusionProblem& problem, const Vec& x) {
  return witness_covariance(PairOracle(problem), x);
}

bool minimal_volume_membership(const PairOracle& oracle, const Vec& x) {
  if (x.isZero(0.0)) return true;
  return eval_g(oracle, x).value <= 1.0;
}

bool minimal_volume_membership(const FusionProblem& problem, const Vec& x) {
  return minimal_volume_membership(PairOracle(problem), x);
}

// ---------------------------------------------------------------------------
// Tightness

namespace {

double radical_inverse(std::uint64_t i, std::uint64_t base) {
  double inv = 1.0 / static_cast<double>(base), f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

constexpr std::uint64_t kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71};

// Halton points pushed through Box–Muller and normalized: low-discrepancy on S^{d−1}.
std::vector<Vec> sphere_directions(int d, int count) {
  std::vector<Vec> out;
  if (d == 1) {
    out.push_back(Vec::Ones(1));
    return out;
  }
  if (d == 2) {
    for (int k = 0; k < count; ++k) {
      const double th = 2.0 * M_PI * k / count;
      Vec v(2);
      v << std::cos(th), std::sin(th);
      out.push_back(v);
    }
    return out;
  }
  const int pairs = (d + 1) / 2;
  if (2 * pairs > static_cast<int>(std::size(kPrimes)))
    fail(ErrorKind::InvalidArgument, "direction sweep supports d ≤ 20");
  for (int k = 1; out.size() < static_cast<std::size_t>(count); ++k) {
    Vec v(d);
    for (int p = 0; p < pairs; ++p) {
      const double u1 = radical_inverse(k, kPrimes[2 * p]);
      const double u2 = radical_inverse(k, kPrimes[2 * p + 1]);
      const double r = std::sqrt(-2.0 * std::log(std::max(u1, 1e-300)));
      v(2 * p) = r * std::cos(2.0 * M_PI * u2);
      if (2 * p + 1 < d) v(2 * p + 1) = r * std::sin(2.0 * M_PI * u2);
    }
    const double n = v.norm();
    if (n > 0.0) out.push_back(v / n);
  }
  return out;
}

}  // namespace

TightnessResult tightness_certificate(const PairOracle& oracle, double omega1, TightnessOptions opts) {
  check_omega(omega1);
  const int d = oracle.dim();
  const SymMatrix af = oracle.information(omega1);
  auto gap = [&](const Vec& x) {
    const double g = eval_g(oracle, x).value;
    return (g - x.dot(af.mat() * x)) / g;
  };
  const auto dirs = sphere_directions(d, d == 2 ? opts.directions_2d : opts.directions_nd);
  TightnessResult res{std::nullopt, static_cast<int>(dirs.size()), std::numeric_limits<double>::infinity()};

  // Sign of h′ at ω₁: positive means the maximizer lies to the right of ω₁.
  int pos = -1, neg = -1;
  double pos_gap = std::numeric_limits<double>::infinity(), neg_gap = pos_gap;
  for (int k = 0; k < static_cast<int>(dirs.size()); ++k) {
    const Vec& x = dirs[k];
    const double gk = gap(x);
    if (gk < res.best_gap) {
      res.best_gap = gk;
      if (gk <= opts.rel_tol) res.certificate = x;
    }
    const double s = oracle.dh(x, omega1);
    if (s > 0.0 && gk < pos_gap) {
      pos_gap = gk;
      pos = k;
    } else if (s < 0.0 && gk < neg_gap) {
      neg_gap = gk;
      neg = k;
    }
  }
  if (res.certificate || pos < 0 || neg < 0) return res;

  // Bisection along the arc from the best positive to the best negative direction.
  Vec a = dirs[pos], b = dirs[neg];
  if (a.dot(b) < 0.0) b = -b;  // h is even in x
  auto at = [&](double t) {
    Vec v = (1.0 - t) * a + t * b;
    return Vec(v / v.norm());
  };
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (oracle.dh(at(mid), omega1) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  for (double t : {lo, hi, 0.5 * (lo + hi)}) {
    const Vec x = at(t);
    const double gk = gap(x);
    if (gk < res.best_gap) res.best_gap = gk;
    if (gk <= opts.rel_tol && !res.certificate) res.certificate = x;
  }
  return res;
}

TightnessResult tightness_certificate(const FusionProblem& problem, double omega1, TightnessOptions opts) {
  return tightness_certificate(PairOracle(problem), omega1, opts);
}

// ---------------------------------------------------------------------------
// Falsification

GainEnvelope gain_envelope(const AdmissibleSampler& sampler, const Mat& gain, CostKind cost,
                           std::span<const BlockMatrix> pool) {
  const auto& p = sampler.problem();
  if (p.count() != 2) fail(ErrorKind::InvalidArgument, "gain envelope needs two estimates");
  const int d = p.state_dim();
  if (gain.rows() != d || gain.cols() != 2 * d) fail(ErrorKind::DimensionMismatch, "gain must be d×2d");
  const Mat k1 = gain.leftCols(d), k2 = gain.rightCols(d);
  const Mat a = k1 * p.estimates[0].unknownCov.mat() * k1.transpose();
  const Mat b = k2 * p.estimates[1].unknownCov.mat() * k2.transpose();
  const Mat c = gain * p.knownCentralCov.mat() * gain.transpose();
  const bool a0 = a.isZero(0.0), b0 = b.isZero(0.0);
  auto envelope = [&](double kappa) {
    kappa = std::clamp(kappa, 1e-12, 1.0 - 1e-12);
    Mat m = c;
    if (!a0) m += a / kappa;
    if (!b0) m += b / (1.0 - kappa);
    return SymMatrix(m);
  };
  const WeightSolution best = optimize_pair(envelope, cost);
  const double kappa = best.omega[0];
  const SymMatrix bound = envelope(kappa);

  auto kpk = [&](const BlockMatrix& pc) { return SymMatrix(gain * pc.mat() * gain.transpose()); };
  std::vector<BlockMatrix> extremes;
  {
    // Rank-one Ω aligning the cross term with a direction u: the worst case along u.
    const SymMatrix s1 = psd_sqrt(p.estimates[0].unknownCov);
    const SymMatrix s2 = psd_sqrt(p.estimates[1].unknownCov);
    Eigen::SelfAdjointEigenSolver<Mat> es(bound.mat());
    std::vector<Vec> us;
    for (int i = 0; i < d; ++i) {
      us.push_back(es.eigenvectors().col(i));
      us.push_back(Vec::Unit(d, i));
    }
    for (const Vec& u : us) {
      const Vec va = s1.mat() * k1.transpose() * u;
      const Vec vb = s2.mat() * k2.transpose() * u;
      const double na = va.norm(), nb = vb.norm();
      if (na == 0.0 || nb == 0.0) continue;
      extremes.push_back(sampler.with_correlation(va * vb.transpose() / (na * nb)));
    }
  }

  const Eigen::LLT<Mat> llt(bound.mat());
  if (llt.info() != Eigen::Success) fail(ErrorKind::SingularMatrix, "envelope bound is not SPD");
  double inflation = 1.0;
  double lower = -std::numeric_limits<double>::infinity();
  auto visit = [&](const BlockMatrix& pc) {
    const SymMatrix s = kpk(pc);
    const Mat l_inv_s = llt.matrixL().solve(s.mat());
    const Mat whitened = llt.matrixL().solve(l_inv_s.transpose());
    inflation = std::max(inflation, max_eig(0.5 * (whitened + whitened.transpose())));
    if (cost != CostKind::LogDet || s.is_spd()) lower = std::max(lower, evaluate_cost(s, cost));
  };
  for (const auto& pc : pool) visit(pc);
  for (const auto& pc : extremes) visit(pc);
  return GainEnvelope{bound * inflation, kappa, inflation, lower};
}

FalsifyReport falsify_optimality(const FusionProblem& problem, FalsifyOptions opts) {
  require_pair(problem);
  if (opts.budget < 1 || opts.samples < 0) fail(ErrorKind::InvalidArgument, "falsify budget must be positive");
  const int d = problem.state_dim();
  const WeightSolution star =
      optimize_pair([&](double w) { return esci_fuse(problem, Simplex::pair(w)).bound; }, opts.cost);
  const FusedResult esci = esci_fuse(problem, star.omega);

  const AdmissibleSampler sampler(problem);
  std::vector<BlockMatrix> pool;
  pool.reserve(opts.samples);
  {
    auto rng = trial_rng(opts.seed, 0xFFFFFFFFu);
    for (int s = 0; s < opts.samples; ++s)
      pool.push_back(sampler.sample(rng, s % 4 == 3 ? SampleMode::Extreme : SampleMode::Random));
  }

  FalsifyReport rep{star.cost,
                    star.omega[0],
                    std::numeric_limits<double>::infinity(),
                    std::numeric_limits<double>::infinity(),
                    1.0,
                    opts.budget,
                    Mat(),
                    false};
  const Mat eye = Mat::Identity(d, d);
  for (int t = 0; t < opts.budget; ++t) {
    auto rng = trial_rng(opts.seed, static_cast<std::uint64_t>(t));
    Mat k(d, 2 * d);
    if (t % 2 == 0) {
      const Mat w = gaussian(d, d, rng);
      k << eye - w, w;
    } else {
      // Perturbation of the ESCI gain along the unbiased directions [−E, E].
      std::uniform_real_distribution<double> expo(-4.0, 0.0);
      const Mat e = std::pow(10.0, expo(rng)) * gaussian(d, d, rng);
      k = esci.gain;
      k.leftCols(d) -= e;
      k.rightCols(d) += e;
    }
    const GainEnvelope env = gain_envelope(sampler, k, opts.cost, pool);
    const double c = evaluate_cost(env.bound, opts.cost);
    rep.maxInflation = std::max(rep.maxInflation, env.inflation);
    rep.minSampledLower = std::min(rep.minSampledLower, env.sampled_lower);
    if (c < rep.minTrialCost) {
      rep.minTrialCost = c;
      rep.bestGain = k;
    }
  }
  rep.undercut = rep.minTrialCost < rep.esciCost - opts.slack * std::abs(rep.esciCost);
  return rep;
}

}  // namespace esci

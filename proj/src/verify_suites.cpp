#include "esci/verify_suites.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace esci {

namespace {

constexpr double kConservTol = 1e-8;
constexpr double kGridTol = 1e-8;
constexpr double kWitnessTol = 1e-7;

FusionProblem prepared(const LoadedProblem& p) {
  if (p.generic.crossCov && !p.generic.crossCov->isZero(0.0)) return decorrelate(p.generic);
  return p.generic;
}

double max_eig(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(a.rows() - 1);
}

std::vector<Simplex> weight_set(int n, const SuiteOptions& opts) {
  std::vector<Simplex> out;
  if (n == 2) {
    for (double w : opts.omegas) out.push_back(Simplex::pair(w));
    return out;
  }
  out.push_back(Simplex::centroid(n));
  auto rng = trial_rng(opts.seed, 77);
  std::exponential_distribution<double> ex(1.0);
  while (out.size() < 5) {
    Vec w(n);
    for (int i = 0; i < n; ++i) w(i) = ex(rng) + 1e-3;
    w /= w.sum();
    w(n - 1) = 1.0 - w.head(n - 1).sum();
    out.push_back(Simplex(w));
  }
  return out;
}

struct Candidate {
  std::string rule;
  Vec omega;
  Mat gain;
  SymMatrix bound;
  double norm;
};

}  // namespace

std::vector<Vec> random_directions(int d, int count, std::uint64_t seed) {
  std::vector<Vec> out;
  std::normal_distribution<double> n01;
  for (int k = 0; out.size() < static_cast<std::size_t>(count); ++k) {
    auto rng = trial_rng(seed, 1000 + static_cast<std::uint64_t>(k));
    Vec v(d);
    for (int i = 0; i < d; ++i) v(i) = n01(rng);
    if (v.norm() > 1e-3) out.push_back(v / v.norm());
  }
  return out;
}

double grid_max_h(const PairOracle& oracle, const Vec& x, int points) {
  if (points < 3) fail(ErrorKind::InvalidArgument, "grid needs at least 3 points");
  double best = -std::numeric_limits<double>::infinity();
  int kb = 0;
  for (int k = 0; k < points; ++k) {
    const double v = oracle.h(x, static_cast<double>(k) / (points - 1));
    if (v > best) {
      best = v;
      kb = k;
    }
  }
  double a = static_cast<double>(std::max(0, kb - 1)) / (points - 1);
  double b = static_cast<double>(std::min(points - 1, kb + 1)) / (points - 1);
  constexpr double r = 0.6180339887498948482;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = oracle.h(x, c), fd = oracle.h(x, d);
  while (b - a > 1e-13) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = oracle.h(x, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = oracle.h(x, d);
    }
  }
  return std::max({best, fc, fd});
}

std::vector<PropertyResult> run_conservatism(const LoadedProblem& loaded, const SuiteOptions& opts) {
  const FusionProblem gp = prepared(loaded);
  const int n = gp.count();
  const int d = gp.state_dim();
  const auto ci = loaded.ci_estimates();
  const bool sci_ok = loaded.common.has_value() ||
                      gp.knownCentralCov.is_block_diagonal(1e-12 * std::max(1.0, gp.knownCentralCov.full().norm()));
  const auto sci = loaded.sci_estimates();

  std::vector<Candidate> cands;
  for (const Simplex& w : weight_set(n, opts)) {
    auto add = [&](std::string rule, const FusedResult& r) {
      const SymMatrix b = r.bound * opts.injectShrink;
      cands.push_back(Candidate{std::move(rule), w.values(), r.gain, b, r.bound.norm()});
    };
    add("ci", ci_fuse(ci, w));
    if (sci_ok) add("sci", sci_fuse(sci, w));
    add("esci", esci_fuse(gp, w));
  }

  const AdmissibleSampler sampler(gp);
  const Mat h = build_centralized_H(n, d);
  auto rng = trial_rng(opts.seed, 0);
  std::vector<double> worst(cands.size(), -std::numeric_limits<double>::infinity());
  double worst_optimal = -std::numeric_limits<double>::infinity();
  double diag_defect = 0.0;
  int singular = 0;
  for (int s = 0; s < opts.samples; ++s) {
    const BlockMatrix pc = sampler.sample(rng, s % 4 == 3 ? SampleMode::Extreme : SampleMode::Random);
    for (int i = 0; i < n; ++i) {
      const Mat blk = pc.block(i, i) - gp.knownCentralCov.block(i, i) - gp.estimates[i].unknownCov.mat();
      diag_defect = std::max(diag_defect, blk.cwiseAbs().maxCoeff() / std::max(1.0, gp.estimates[i].unknownCov.norm()));
    }
    for (std::size_t c = 0; c < cands.size(); ++c) {
      const Mat kpk = cands[c].gain * pc.mat() * cands[c].gain.transpose();
      worst[c] = std::max(worst[c], max_eig(kpk - cands[c].bound.mat()) / cands[c].norm);
    }
    try {
      const SymMatrix pf = spd_inverse(SymMatrix(h.transpose() * spd_solve(pc.full(), h)));
      for (const auto& c : cands)
        if (c.rule == "esci") worst_optimal = std::max(worst_optimal, max_eig(pf.mat() - c.bound.mat()) / c.norm);
    } catch (const FusionError&) {
      ++singular;
    }
  }

  std::vector<PropertyResult> out;
  for (const std::string rule : {"ci", "sci", "esci"}) {
    double w = -std::numeric_limits<double>::infinity();
    Json per = Json::array();
    bool any = false;
    for (std::size_t c = 0; c < cands.size(); ++c) {
      if (cands[c].rule != rule) continue;
      any = true;
      w = std::max(w, worst[c]);
      per.push_back({{"omega", vec_to_json(cands[c].omega)}, {"worst", worst[c]}});
    }
    if (!any) {
      out.push_back(PropertyResult{"conservatism-" + rule, true, 0.0, kConservTol,
                                   {{"skipped", "known part is not block-diagonal"}}});
      continue;
    }
    out.push_back(PropertyResult{"conservatism-" + rule, w <= kConservTol, w, kConservTol,
                                 {{"samples", opts.samples}, {"perOmega", per}}});
  }
  out.push_back(PropertyResult{"optimal-below-esci-bound", worst_optimal <= kConservTol, worst_optimal, kConservTol,
                               {{"singularSamples", singular}}});
  out.push_back(PropertyResult{"sampler-validity", diag_defect <= 1e-12, diag_defect, 1e-12, Json::object()});
  return out;
}

std::vector<PropertyResult> run_theorem2(const LoadedProblem& loaded, const SuiteOptions& opts) {
  const PairOracle oracle(prepared(loaded));
  const int d = oracle.dim();
  double grid_err = 0.0, witness_err = 0.0, concave = -std::numeric_limits<double>::infinity(), deriv_err = 0.0;
  int witness_failures = 0;
  Json cases = Json::object();
  Json witnesses = Json::array();
  for (const Vec& x : random_directions(d, opts.directions, opts.seed)) {
    const GEvaluation g = eval_g(oracle, x);
    cases[std::string(to_string(g.caseTag))] = cases.value(std::string(to_string(g.caseTag)), 0) + 1;
    const double grid = grid_max_h(oracle, x, opts.grid);
    grid_err = std::max(grid_err, std::abs(g.value - grid) / std::abs(g.value));
    try {
      const WitnessCovariance w = witness_covariance(oracle, x);
      witness_err = std::max(witness_err, std::abs(w.achieved - g.value) / std::abs(g.value));
      if (witnesses.size() < 3) witnesses.push_back({{"x", vec_to_json(x)}, {"omega", mat_to_json(w.omega)}});
    } catch (const FusionError& e) {
      if (e.kind() != ErrorKind::WitnessFailed) throw;
      ++witness_failures;
      witness_err = std::numeric_limits<double>::infinity();
    }
    for (int k = 1; k <= 9; ++k) {
      const double w = 0.1 * k;
      const HDerivatives hd = h_and_derivatives(oracle, x, w);
      concave = std::max(concave, hd.d2h / std::abs(hd.h));
      const double fd = (oracle.h(x, w + 1e-6) - oracle.h(x, w - 1e-6)) / 2e-6;
      deriv_err = std::max(deriv_err, std::abs(fd - hd.dh) / std::max(1.0, std::abs(hd.h)));
    }
  }
  return {
      PropertyResult{"g-equals-grid-max", grid_err <= kGridTol, grid_err, kGridTol,
                     {{"directions", opts.directions}, {"grid", opts.grid}, {"cases", cases}}},
      PropertyResult{"witness-achieves-g", witness_err <= kWitnessTol, witness_err, kWitnessTol,
                     {{"failures", witness_failures}, {"examples", witnesses}}},
      PropertyResult{"h-strictly-concave", concave < 0.0, concave, 0.0, {{"omegas", "0.1..0.9"}}},
      PropertyResult{"h-derivative-formula", deriv_err <= 1e-5, deriv_err, 1e-5, Json::object()},
  };
}

std::vector<PropertyResult> run_tightness(const LoadedProblem& loaded, const SuiteOptions& opts) {
  (void)opts;
  const FusionProblem gp = prepared(loaded);
  const PairOracle oracle(gp);
  const WeightSolution star =
      optimize_pair([&](double w) { return esci_fuse(gp, Simplex::pair(w)).bound; }, CostKind::Trace);
  const double w1 = star.omega[0];
  const TightnessResult at_star = tightness_certificate(oracle, w1);
  const double displaced = w1 + 0.2 <= 1.0 ? w1 + 0.2 : w1 - 0.2;
  const TightnessResult off = tightness_certificate(oracle, displaced);
  Json detail{{"omegaStar", w1},
              {"directions", at_star.directions},
              {"bestGap", at_star.best_gap},
              {"displacedOmega", displaced},
              {"displacedCertificate", off.certificate.has_value()},
              {"displacedBestGap", off.best_gap}};
  if (at_star.certificate) detail["certificate"] = vec_to_json(*at_star.certificate);
  return {PropertyResult{"tight-at-optimal-weight", at_star.certificate.has_value(), at_star.best_gap, 1e-7,
                         std::move(detail)}};
}

std::vector<PropertyResult> run_falsify(const LoadedProblem& loaded, const SuiteOptions& opts) {
  FalsifyOptions fo;
  fo.budget = opts.budget;
  fo.seed = opts.seed;
  const FalsifyReport r = falsify_optimality(prepared(loaded), fo);
  const double rel = (r.esciCost - r.minTrialCost) / std::abs(r.esciCost);
  return {PropertyResult{"no-gain-beats-esci", !r.undercut, rel, fo.slack,
                         {{"esciCost", r.esciCost},
                          {"esciOmega", r.esciOmega},
                          {"minTrialCost", r.minTrialCost},
                          {"minSampledLower", r.minSampledLower},
                          {"maxInflation", r.maxInflation},
                          {"trials", r.trials}}}};
}

Json results_to_json(const std::vector<PropertyResult>& results) {
  Json props = Json::array();
  bool all = true;
  for (const auto& r : results) {
    all = all && r.pass;
    Json j{{"name", r.name}, {"pass", r.pass}, {"threshold", r.threshold}, {"detail", r.detail}};
    j["worst"] = std::isfinite(r.worst) ? Json(r.worst) : Json(std::to_string(r.worst));
    props.push_back(std::move(j));
  }
  return Json{{"pass", all}, {"properties", props}};
}

}  // namespace esci

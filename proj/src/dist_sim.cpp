#include "esci/dist_sim.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "esci/number_format.hpp"

namespace esci {

namespace {

constexpr int kTrialBlock = 50;

SymMatrix noise_cov(const ScenarioConfig& c) { return SymMatrix::scaled_identity(1, c.sigmaW2 > 0.0 ? c.sigmaW2 : 1.0); }

Mat noise_shape(const ScenarioConfig& c) {
  if (c.sigmaW2 > 0.0) return c.q;
  return Mat::Zero(c.state_dim(), 1);
}

}  // namespace

std::optional<Rule> parse_rule(std::string_view name) {
  if (name == "ci") return Rule::CI;
  if (name == "sci") return Rule::SCI;
  if (name == "esci") return Rule::ESCI;
  return std::nullopt;
}

std::string_view to_string(Rule rule) {
  switch (rule) {
    case Rule::CI: return "ci";
    case Rule::SCI: return "sci";
    case Rule::ESCI: return "esci";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// ScenarioConfig

SymMatrix ScenarioConfig::process_cov() const { return SymMatrix(sigmaW2 * q * q.transpose()); }

std::vector<int> ScenarioConfig::neighbors(int i) const {
  std::vector<int> out;
  for (int j = 0; j < node_count(); ++j)
    if (adjacency[i][j]) out.push_back(j);
  return out;
}

void ScenarioConfig::validate() const {
  const int d = state_dim();
  if (d < 1 || F.cols() != d) fail(ErrorKind::DimensionMismatch, "F must be square");
  require_finite(F, "F");
  if (q.size() != d) fail(ErrorKind::DimensionMismatch, "q must have the state dimension");
  require_finite(q, "q");
  if (!(std::isfinite(dt) && dt > 0.0)) fail(ErrorKind::InvalidArgument, "dt must be positive");
  if (!(std::isfinite(sigmaW2) && sigmaW2 >= 0.0)) fail(ErrorKind::InvalidArgument, "sigmaW2 must be non-negative");
  if (nodes.empty()) fail(ErrorKind::InvalidArgument, "scenario needs at least one node");
  for (const auto& n : nodes) {
    if (n.H.rows() != 1 || n.H.cols() != d) fail(ErrorKind::DimensionMismatch, "H must be 1×d");
    require_finite(n.H, "H");
    if (!(std::isfinite(n.R) && n.R > 0.0)) fail(ErrorKind::InvalidArgument, "R must be positive");
  }
  const int n = node_count();
  if (static_cast<int>(adjacency.size()) != n) fail(ErrorKind::DimensionMismatch, "adjacency must be N×N");
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(adjacency[i].size()) != n) fail(ErrorKind::DimensionMismatch, "adjacency must be N×N");
    if (adjacency[i][i]) fail(ErrorKind::InvalidArgument, "adjacency must have a zero diagonal");
    for (int j = 0; j < n; ++j)
      if (adjacency[i][j] != adjacency[j][i]) fail(ErrorKind::InvalidArgument, "adjacency must be symmetric");
  }
  if (steps < 1 || trials < 1) fail(ErrorKind::InvalidArgument, "steps and trials must be at least 1");
  if (x0.size() != d) fail(ErrorKind::DimensionMismatch, "x0 must have the state dimension");
  if (P0.dim() != d) fail(ErrorKind::DimensionMismatch, "P0 must have the state dimension");
  if (!P0.is_psd()) fail(ErrorKind::NotPSD, "P0 must be PSD");
}

Mat ScenarioConfig::constant_acceleration_F(double dt) {
  Mat f(3, 3);
  f << 1.0, dt, dt * dt / 2.0, 0.0, 1.0, dt, 0.0, 0.0, 1.0;
  return f;
}

Vec ScenarioConfig::constant_acceleration_q(double dt) {
  Vec q(3);
  q << dt * dt * dt / 6.0, dt * dt / 2.0, dt;
  return q;
}

// ---------------------------------------------------------------------------
// Truth, predict, update

Trajectory simulate_truth(const ScenarioConfig& c, const NoiseField& noise, std::uint32_t trial) {
  const double sw = std::sqrt(c.sigmaW2);
  Trajectory t;
  t.x.reserve(c.steps + 1);
  t.x.push_back(c.x0);
  t.z.resize(c.node_count(), c.steps);
  for (int k = 1; k <= c.steps; ++k) {
    const auto step = static_cast<std::uint32_t>(k);
    Vec x = c.F * t.x.back() + c.q * (sw * noise.normal(trial, 0, step));
    for (int i = 0; i < c.node_count(); ++i) {
      const double v = std::sqrt(c.nodes[i].R) * noise.normal(trial, static_cast<std::uint32_t>(i + 1), step);
      t.z(i, k - 1) = (c.nodes[i].H * x)(0) + v;
    }
    t.x.push_back(std::move(x));
  }
  return t;
}

NodeState predict(const NodeState& node, const ScenarioConfig& c) {
  NodeState out = node;
  out.mean = c.F * node.mean;
  out.cov = SymMatrix(c.F * node.cov.mat() * c.F.transpose()) + c.process_cov();
  out.priorCov.reset();
  out.gain = Mat();
  return out;
}

NodeState measurement_update(const NodeState& node, double z, const Mat& H, double R) {
  if (!(R > 0.0)) fail(ErrorKind::InvalidArgument, "R must be positive");
  const SymMatrix info(spd_inverse(node.cov).mat() + H.transpose() * H / R);
  const SymMatrix pa = spd_inverse(info);
  const Mat w = pa.mat() * H.transpose() / R;
  return NodeState{node.mean + w * (z - (H * node.mean)(0)), pa, SymMatrix(w * R * w.transpose()), w, node.cov};
}

// ---------------------------------------------------------------------------
// Splits and fusion

CommonNoiseEstimate build_split(const NodeState& u, const Mat& H, Rule rule, const ScenarioConfig& c) {
  const int d = c.state_dim();
  if (!u.priorCov || u.gain.size() == 0) fail(ErrorKind::InvalidArgument, "build_split needs an updated node");
  const Mat iwh = Mat::Identity(d, d) - u.gain * H;
  const Mat zero_m = Mat::Zero(d, 1);
  switch (rule) {
    case Rule::CI: return CommonNoiseEstimate{u.mean, u.cov, SymMatrix::zero(d), zero_m};
    case Rule::SCI:
      return CommonNoiseEstimate{u.mean, SymMatrix(iwh * u.priorCov->mat() * iwh.transpose()), u.lastMeasCov, zero_m};
    case Rule::ESCI: {
      const Mat m = -iwh * noise_shape(c);
      const Mat prev = u.priorCov->mat() - c.process_cov().mat();  // F P Fᵀ
      return CommonNoiseEstimate{u.mean, SymMatrix(iwh * prev * iwh.transpose()), u.lastMeasCov, m};
    }
  }
  fail(ErrorKind::InvalidArgument, "unknown rule");
}

CommonNoiseEstimate prediction_split(const NodeState& p, const SymMatrix& prev, Rule rule, const ScenarioConfig& c) {
  const int d = c.state_dim();
  if (rule != Rule::ESCI) return CommonNoiseEstimate{p.mean, p.cov, SymMatrix::zero(d), Mat::Zero(d, 1)};
  return CommonNoiseEstimate{p.mean, SymMatrix(c.F * prev.mat() * c.F.transpose()), SymMatrix::zero(d),
                             -noise_shape(c)};
}

FusionOutcome fuse_inputs(std::span<const CommonNoiseEstimate> inputs, Rule rule, const SymMatrix& noiseCov,
                          CostKind cost) {
  const int n = static_cast<int>(inputs.size());
  if (n == 0) fail(ErrorKind::InvalidArgument, "nothing to fuse");
  const CommonNoiseProblem problem{std::vector<CommonNoiseEstimate>(inputs.begin(), inputs.end()), noiseCov};
  problem.validate();
  std::vector<Estimate> ci;
  std::vector<SplitEstimate> sci;
  if (rule == Rule::CI) ci = problem.ci_estimates();
  if (rule == Rule::SCI) sci = problem.sci_split();
  auto fuse = [&](const Simplex& w) -> FusedResult {
    switch (rule) {
      case Rule::CI: return ci_fuse(ci, w);
      case Rule::SCI: return sci_fuse(sci, w);
      case Rule::ESCI: return esci_fuse_common_noise(problem, w);
    }
    fail(ErrorKind::InvalidArgument, "unknown rule");
  };
  Simplex omega = Simplex::centroid(n);
  if (n == 2) {
    omega = optimize_pair([&](double w) { return fuse(Simplex::pair(w)).bound; }, cost).omega;
  } else if (n >= 3) {
    omega = optimize_simplex([&](const Simplex& w) { return fuse(w).bound; }, cost, n).omega;
  }
  FusedResult r = fuse(omega);
  const double j = evaluate_cost(r.bound, cost);
  return FusionOutcome{std::move(r.mean), std::move(r.bound), std::move(r.gain), omega.values(), j};
}

NodeState fuse_neighborhood(const NodeState& predicted, const SymMatrix& previousCov,
                            std::span<const CommonNoiseEstimate> received, Rule rule, const ScenarioConfig& config) {
  std::vector<CommonNoiseEstimate> inputs;
  inputs.reserve(received.size() + 1);
  inputs.push_back(prediction_split(predicted, previousCov, rule, config));
  inputs.insert(inputs.end(), received.begin(), received.end());
  const FusionOutcome f = fuse_inputs(inputs, rule, noise_cov(config));
  return NodeState{f.mean, f.bound, SymMatrix::zero(config.state_dim()), Mat(), std::nullopt};
}

// ---------------------------------------------------------------------------
// Schedule

Schedule build_schedule(const ScenarioConfig& c, Rule rule) {
  c.validate();
  const int n = c.node_count();
  const int d = c.state_dim();
  const SymMatrix qn = noise_cov(c);
  Schedule s{rule, c.steps, n, {}, 0.0};
  s.entries.resize(c.steps);
  std::vector<NodeState> post(n, NodeState{Vec::Zero(d), c.P0, SymMatrix::zero(d), Mat(), std::nullopt});
  std::vector<std::vector<int>> nbr(n);
  for (int i = 0; i < n; ++i) nbr[i] = c.neighbors(i);

  for (int k = 1; k <= c.steps; ++k) {
    std::vector<NodeState> pred, upd;
    std::vector<CommonNoiseEstimate> msg;
    for (int i = 0; i < n; ++i) {
      pred.push_back(predict(post[i], c));
      upd.push_back(measurement_update(pred[i], 0.0, c.nodes[i].H, c.nodes[i].R));
      msg.push_back(build_split(upd[i], c.nodes[i].H, rule, c));
      const Mat re = msg[i].unknownCov.mat() + msg[i].indepCov.mat() +
                     msg[i].noiseGain * qn.mat() * msg[i].noiseGain.transpose() - upd[i].cov.mat();
      s.splitDefect = std::max(s.splitDefect, spectral_norm(re) / upd[i].cov.norm());
    }
    auto& row = s.entries[k - 1];
    row.reserve(n);
    std::vector<NodeState> next;
    for (int i = 0; i < n; ++i) {
      std::vector<CommonNoiseEstimate> inputs{prediction_split(pred[i], post[i].cov, rule, c)};
      {
        const Mat re = inputs[0].unknownCov.mat() + inputs[0].noiseGain * qn.mat() * inputs[0].noiseGain.transpose() -
                       pred[i].cov.mat();
        s.splitDefect = std::max(s.splitDefect, spectral_norm(re) / pred[i].cov.norm());
      }
      std::vector<int> sources{i};
      for (int j : nbr[i]) {
        inputs.push_back(msg[j]);
        sources.push_back(j);
      }
      FusionOutcome f = fuse_inputs(inputs, rule, qn);
      NodeState fused{Vec::Zero(d), f.bound, SymMatrix::zero(d), Mat(), std::nullopt};
      next.push_back(measurement_update(fused, 0.0, c.nodes[i].H, c.nodes[i].R));
      row.push_back(ScheduleEntry{std::move(sources), std::move(f.gain), upd[i].gain, next[i].gain, std::move(f.omega),
                                  f.bound.trace(), f.bound, next[i].cov});
    }
    post = std::move(next);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Monte Carlo

namespace {

// Squared errors of one trial added into acc.
void run_trial(const ScenarioConfig& c, const Schedule& s, const NoiseField& noise, std::uint32_t trial,
               std::vector<double>& acc) {
  const int n = c.node_count();
  const int d = c.state_dim();
  const Trajectory truth = simulate_truth(c, noise, trial);
  std::vector<Vec> xhat(n, c.x0), pred(n), autonomous(n);
  for (int k = 1; k <= c.steps; ++k) {
    const auto& row = s.entries[k - 1];
    for (int i = 0; i < n; ++i) {
      pred[i] = c.F * xhat[i];
      const double z = truth.z(i, k - 1);
      autonomous[i] = pred[i] + row[i].autoGain * (z - (c.nodes[i].H * pred[i])(0));
    }
    for (int i = 0; i < n; ++i) {
      const auto& e = row[i];
      Vec fused = e.fusionGain.leftCols(d) * pred[i];
      for (std::size_t a = 1; a < e.sources.size(); ++a)
        fused += e.fusionGain.middleCols(static_cast<int>(a) * d, d) * autonomous[e.sources[a]];
      const double z = truth.z(i, k - 1);
      xhat[i] = fused + e.finalGain * (z - (c.nodes[i].H * fused)(0));
      const Vec err = xhat[i] - truth.x[k];
      double* out = acc.data() + (static_cast<std::size_t>(k - 1) * n + i) * d;
      for (int j = 0; j < d; ++j) out[j] += err(j) * err(j);
    }
  }
}

}  // namespace

MonteCarloReport run_monte_carlo(const ScenarioConfig& config, int threads) {
  return run_monte_carlo(config, build_schedule(config, config.rule), threads);
}

MonteCarloReport run_monte_carlo(const ScenarioConfig& c, const Schedule& s, int threads) {
  c.validate();
  if (s.steps != c.steps || s.nodes != c.node_count()) fail(ErrorKind::DimensionMismatch, "schedule/config mismatch");
  const int n = c.node_count();
  const int d = c.state_dim();
  const std::size_t cells = static_cast<std::size_t>(c.steps) * n * d;
  const int blocks = (c.trials + kTrialBlock - 1) / kTrialBlock;
  std::vector<std::vector<double>> partial(blocks, std::vector<double>(cells, 0.0));
  const NoiseField noise(c.seed);

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int b = next.fetch_add(1); b < blocks; b = next.fetch_add(1)) {
      const int lo = b * kTrialBlock;
      const int hi = std::min(c.trials, lo + kTrialBlock);
      for (int t = lo; t < hi; ++t) run_trial(c, s, noise, static_cast<std::uint32_t>(t), partial[b]);
    }
  };
  threads = std::max(1, std::min(threads, blocks));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  MonteCarloReport rep{s.rule, c.steps, n, d, c.trials, std::vector<double>(cells), std::vector<double>(cells, 0.0), s};
  for (int b = 0; b < blocks; ++b)
    for (std::size_t i = 0; i < cells; ++i) rep.mse[i] += partial[b][i];
  for (std::size_t i = 0; i < cells; ++i) rep.mse[i] /= c.trials;
  for (int k = 1; k <= c.steps; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j)
        rep.bound[(static_cast<std::size_t>(k - 1) * n + i) * d + j] = s.entries[k - 1][i].posterior(j, j);
  return rep;
}

std::vector<double> exact_error_variance(const ScenarioConfig& c, const Schedule& s) {
  c.validate();
  if (s.steps != c.steps || s.nodes != c.node_count()) fail(ErrorKind::DimensionMismatch, "schedule/config mismatch");
  const int n = c.node_count();
  const int d = c.state_dim();
  const int nd = n * d;
  // Error coordinates: [e_1 … e_n, w, v_1 … v_n].
  const int m = nd + 1 + n;
  Mat noise = Mat::Zero(m, m);
  noise(nd, nd) = c.sigmaW2;
  for (int i = 0; i < n; ++i) noise(nd + 1 + i, nd + 1 + i) = c.nodes[i].R;
  Mat cov = Mat::Zero(nd, nd);
  std::vector<double> out(static_cast<std::size_t>(c.steps) * nd);
  for (int k = 1; k <= c.steps; ++k) {
    const auto& row = s.entries[k - 1];
    std::vector<Mat> pred(n), autonomous(n);
    for (int i = 0; i < n; ++i) {
      pred[i] = Mat::Zero(d, m);
      pred[i].middleCols(i * d, d) = c.F;
      pred[i].col(nd) = -c.q;
      autonomous[i] = pred[i] - row[i].autoGain * (c.nodes[i].H * pred[i]);
      autonomous[i].col(nd + 1 + i) += row[i].autoGain;
    }
    Mat t(nd, m);
    for (int i = 0; i < n; ++i) {
      const auto& e = row[i];
      Mat f = e.fusionGain.leftCols(d) * pred[i];
      for (std::size_t a = 1; a < e.sources.size(); ++a)
        f += e.fusionGain.middleCols(static_cast<int>(a) * d, d) * autonomous[e.sources[a]];
      Mat ei = f - e.finalGain * (c.nodes[i].H * f);
      ei.col(nd + 1 + i) += e.finalGain;
      t.middleRows(i * d, d) = ei;
    }
    Mat full = noise;
    full.topLeftCorner(nd, nd) = cov;
    cov = t * full * t.transpose();
    cov = 0.5 * (cov + cov.transpose());
    for (int j = 0; j < nd; ++j) out[static_cast<std::size_t>(k - 1) * nd + j] = cov(j, j);
  }
  return out;
}

double steady_state_ratio(const MonteCarloReport& num, const MonteCarloReport& den, int coord, int from, int to) {
  if (num.steps != den.steps || num.nodes != den.nodes || num.dim != den.dim)
    fail(ErrorKind::DimensionMismatch, "reports differ in shape");
  if (from < 1 || to > num.steps || from > to) fail(ErrorKind::InvalidArgument, "step window out of range");
  double sum = 0.0;
  int cnt = 0;
  for (int k = from; k <= to; ++k)
    for (int i = 0; i < num.nodes; ++i) {
      sum += num.cell(k, i, coord).bound / den.cell(k, i, coord).bound;
      ++cnt;
    }
  return sum / cnt;
}

double conservative_fraction(const MonteCarloReport& r) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < r.mse.size(); ++i)
    if (r.mse[i] <= r.bound[i]) ++ok;
  return static_cast<double>(ok) / static_cast<double>(r.mse.size());
}

std::string results_csv(std::span<const MonteCarloReport> reports) {
  std::ostringstream os;
  os << "rule,node,step,coord,bound_mean,mse\n";
  for (const auto& r : reports)
    for (int i = 0; i < r.nodes; ++i)
      for (int k = 1; k <= r.steps; ++k)
        for (int j = 0; j < r.dim; ++j) {
          const CellStats cs = r.cell(k, i, j);
          os << to_string(r.rule) << ',' << i + 1 << ',' << k << ',' << j << ',' << format_number(cs.bound) << ','
             << format_number(cs.mse) << '\n';
        }
  return os.str();
}

}  // namespace esci

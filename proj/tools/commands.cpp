#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "esci/conservatism_oracle.hpp"
#include "esci/dist_sim.hpp"
#include "esci/json_io.hpp"
#include "esci/number_format.hpp"
#include "esci/verify_suites.hpp"
#include "esci/weight_opt.hpp"

namespace esci::cli {

namespace fs = std::filesystem;

std::string data_dir() {
  if (const char* env = std::getenv("ESCI_DATA_DIR")) return env;
  return ESCI_DATA_DIR;
}

namespace {

using Clock = std::chrono::steady_clock;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Source {
  std::string file;
  std::string builtin;

  std::string path() const {
    if (!file.empty() && !builtin.empty()) throw InputError("give either a file or --builtin, not both");
    if (!builtin.empty()) {
      const fs::path p = fs::path(data_dir()) / (builtin + ".json");
      if (!fs::exists(p)) throw InputError("unknown built-in configuration \"" + builtin + "\"");
      return p.string();
    }
    if (file.empty()) throw InputError("no input given (use --problem/--config or --builtin)");
    return file;
  }
};

struct Manifest {
  std::string subcommand;
  Json config;
  std::uint64_t seed = 0;
  Clock::time_point start = Clock::now();

  void write_for(const std::string& output) const {
    const double wall = std::chrono::duration<double>(Clock::now() - start).count();
    Json m{{"subcommand", subcommand},
           {"configHash", hex64(config_hash(config))},
           {"seed", seed},
           {"toolVersion", ESCI_VERSION},
           {"wallTime", wall},
           {"output", fs::path(output).filename().string()}};
    std::ofstream(output + ".manifest.json") << m.dump(2) << '\n';
  }
};

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path);
  f << text;
}

CostKind cost_of(const std::string& s) {
  const auto c = parse_cost(s);
  if (!c) throw InputError("unknown cost \"" + s + "\"");
  return *c;
}

FusionProblem prepared(const LoadedProblem& p) {
  if (p.generic.crossCov && !p.generic.crossCov->isZero(0.0)) return decorrelate(p.generic);
  return p.generic;
}

// Fusion by rule name over a loaded problem.
struct Fuser {
  LoadedProblem loaded;
  FusionProblem gp;
  std::vector<Estimate> ci;
  std::vector<SplitEstimate> sci;
  std::string rule;

  Fuser(LoadedProblem l, std::string r) : loaded(std::move(l)), gp(prepared(loaded)), rule(std::move(r)) {
    if (rule != "ci" && rule != "sci" && rule != "esci" && rule != "optimal")
      throw InputError("unknown rule \"" + rule + "\"");
    ci = loaded.ci_estimates();
    sci = loaded.sci_estimates();
  }

  int count() const { return gp.count(); }

  FusedResult operator()(const Simplex& w) const {
    if (rule == "ci") return ci_fuse(ci, w);
    if (rule == "sci") return sci_fuse(sci, w);
    if (rule == "esci") return esci_fuse(gp, w);
    Mat pc = gp.knownCentralCov.mat();
    const int d = gp.state_dim();
    for (int i = 0; i < gp.count(); ++i) pc.block(i * d, i * d, d, d) += gp.estimates[i].unknownCov.mat();
    std::vector<Vec> means;
    for (const auto& e : gp.estimates) means.push_back(e.mean);
    return optimal_fusion(BlockMatrix(d, gp.count(), pc), means);
  }
};

Simplex parse_weights(const std::vector<double>& w, int n) {
  if (n == 2 && w.size() == 1) return Simplex::pair(w[0]);
  if (static_cast<int>(w.size()) != n)
    throw InputError("--omega needs " + std::to_string(n) + " values (or one value for two estimates)");
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = w[i];
  return Simplex(v);
}

WeightSolution optimize(const Fuser& f, CostKind cost, double tol) {
  const int n = f.count();
  if (n == 1) {
    const Simplex w = Simplex::centroid(1);
    return WeightSolution{w, evaluate_cost(f(w).bound, cost), 1};
  }
  if (n == 2) {
    PairOptions po;
    po.tol = tol;
    return optimize_pair([&](double w) { return f(Simplex::pair(w)).bound; }, cost, po);
  }
  SimplexOptions so;
  so.line_tol = std::min(so.line_tol, tol);
  return optimize_simplex([&](const Simplex& w) { return f(w).bound; }, cost, n, so);
}

std::string csv_number(double v) { return std::isfinite(v) ? format_number(v) : std::string("nan"); }

// ---------------------------------------------------------------------------

struct FuseArgs {
  Source src;
  std::string rule = "esci";
  std::string cost = "trace";
  std::vector<double> omega;
  bool optimize = false;
  double omega_tol = 1e-8;
  std::string out;
};

int cmd_fuse(const FuseArgs& a, std::ostream& out) {
  Manifest man{"fuse", {}, 0};
  const std::string path = a.src.path();
  man.config = read_json_file(path);
  const Fuser f(problem_from_json(man.config), a.rule);
  const CostKind cost = cost_of(a.cost);
  if (a.optimize && !a.omega.empty()) throw InputError("--omega and --optimize are exclusive");
  Simplex w = Simplex::centroid(f.count());
  int evals = 0;
  if (a.optimize && a.rule != "optimal") {
    const WeightSolution s = optimize(f, cost, a.omega_tol);
    w = s.omega;
    evals = s.evaluations;
  } else if (!a.omega.empty()) {
    w = parse_weights(a.omega, f.count());
  }
  const FusedResult r = f(w);
  Json j = fused_to_json(r);
  j["rule"] = a.rule;
  j["costKind"] = a.cost;
  j["cost"] = evaluate_cost(r.bound, cost);
  if (a.rule != "optimal") j["omega"] = vec_to_json(w.values());
  if (evals > 0) j["evaluations"] = evals;
  write_text(a.out, j.dump(2) + "\n", out);
  if (!a.out.empty() && a.out != "-") man.write_for(a.out);
  return kOk;
}

struct SweepArgs {
  Source src;
  std::string rule = "all";
  int grid = 6;
  int points = 180;
  std::string out;
  std::string ellipses;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  Manifest man{"sweep", {}, 0};
  man.config = read_json_file(a.src.path());
  const LoadedProblem loaded = problem_from_json(man.config);
  if (loaded.generic.count() != 2) throw InputError("sweep needs exactly two estimates");
  if (a.grid < 2) throw InputError("--grid must be at least 2");
  std::vector<std::string> rules;
  if (a.rule == "all")
    rules = {"ci", "sci", "esci"};
  else
    rules = {a.rule};
  const int d = loaded.generic.state_dim();
  std::ostringstream rows, ell;
  rows << "rule,omega,trace,logdet\n";
  ell << "rule,omega,k,x,y\n";
  for (const auto& rule : rules) {
    const Fuser f(loaded, rule);
    for (int k = 0; k < a.grid; ++k) {
      const double w = static_cast<double>(k) / (a.grid - 1);
      const SymMatrix b = f(Simplex::pair(w)).bound;
      double ld = std::numeric_limits<double>::quiet_NaN();
      if (b.is_spd()) ld = log_det_spd(b);
      rows << rule << ',' << format_number(w) << ',' << format_number(b.trace()) << ',' << csv_number(ld) << '\n';
      if (d == 2) {
        const auto pts = ellipse_boundary(b, a.points);
        for (int p = 0; p < a.points; ++p)
          ell << rule << ',' << format_number(w) << ',' << p << ',' << format_number(pts[p].x()) << ','
              << format_number(pts[p].y()) << '\n';
      }
    }
  }
  write_text(a.out, rows.str(), out);
  if (!a.out.empty() && a.out != "-") man.write_for(a.out);
  if (d == 2) {
    std::string epath = a.ellipses;
    if (epath.empty() && !a.out.empty() && a.out != "-")
      epath = (fs::path(a.out).parent_path() / "ellipses.csv").string();
    if (!epath.empty()) {
      write_text(epath, ell.str(), out);
      man.write_for(epath);
    }
  }
  return kOk;
}

struct SimulateArgs {
  Source src;
  std::string rule;
  int trials = -1;
  int steps = -1;
  long long seed = -1;
  int threads = 1;
  std::string out = "results.csv";
};

std::string with_suffix(const std::string& out, const std::string& rule) {
  const fs::path p(out);
  return (p.parent_path() / (p.stem().string() + "-" + rule + p.extension().string())).string();
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  Manifest man{"simulate", {}, 0};
  Json cfg = read_json_file(a.src.path());
  if (a.trials > 0) cfg["trials"] = a.trials;
  if (a.steps > 0) cfg["steps"] = a.steps;
  if (a.seed >= 0) cfg["seed"] = static_cast<std::uint64_t>(a.seed);
  if (!a.rule.empty() && a.rule != "all") cfg["rule"] = a.rule;
  ScenarioConfig c = scenario_from_json(cfg);
  man.config = cfg;
  man.seed = c.seed;
  std::vector<Rule> rules{c.rule};
  if (a.rule == "all") rules = {Rule::CI, Rule::SCI, Rule::ESCI};
  if (a.threads < 1) throw InputError("--threads must be positive");

  std::vector<MonteCarloReport> reports;
  Json summary{{"trials", c.trials}, {"steps", c.steps}, {"seed", c.seed}, {"rules", Json::object()}};
  for (Rule r : rules) {
    c.rule = r;
    MonteCarloReport rep = run_monte_carlo(c, a.threads);
    const std::string name(to_string(r));
    summary["rules"][name] = {{"conservativeFraction", conservative_fraction(rep)},
                              {"splitDefect", rep.schedule.splitDefect}};
    const std::string path = rules.size() == 1 ? a.out : with_suffix(a.out, name);
    write_text(path, results_csv(std::span(&rep, 1)), out);
    if (path != "-") {
      man.config["rule"] = name;
      man.write_for(path);
    }
    reports.push_back(std::move(rep));
  }
  auto find = [&](Rule r) -> const MonteCarloReport* {
    for (const auto& rep : reports)
      if (rep.rule == r) return &rep;
    return nullptr;
  };
  const auto* ci = find(Rule::CI);
  const auto* sci = find(Rule::SCI);
  const auto* esci = find(Rule::ESCI);
  if (sci && esci) {
    const int from = std::min(70, c.steps);
    Json ratios = Json::array();
    for (int j = 0; j < esci->dim; ++j) ratios.push_back(steady_state_ratio(*esci, *sci, j, from, c.steps));
    summary["esciOverSciSteadyState"] = ratios;
  }
  if (ci && sci && esci) {
    int violations = 0;
    for (int k = 0; k < c.steps; ++k)
      for (int i = 0; i < c.node_count(); ++i) {
        const double te = esci->schedule.entries[k][i].fusedTrace;
        const double ts = sci->schedule.entries[k][i].fusedTrace;
        const double tc = ci->schedule.entries[k][i].fusedTrace;
        if (te > ts * (1 + 1e-9) || ts > tc * (1 + 1e-9)) ++violations;
      }
    summary["orderingViolations"] = violations;
  }
  if (a.out != "-") out << summary.dump(2) << '\n';
  return kOk;
}

struct VerifyArgs {
  Source src;
  std::string suite = "all";
  int budget = 1000;
  int samples = 10000;
  long long seed = 1;
  double inject_shrink = 1.0;
  std::string out;
};

int cmd_verify(const VerifyArgs& a, std::ostream& out) {
  Manifest man{"verify", {}, static_cast<std::uint64_t>(a.seed)};
  man.config = read_json_file(a.src.path());
  const LoadedProblem loaded = problem_from_json(man.config);
  SuiteOptions o;
  o.budget = a.budget;
  o.samples = a.samples;
  o.seed = static_cast<std::uint64_t>(a.seed);
  o.injectShrink = a.inject_shrink;
  if (!(a.inject_shrink > 0.0)) throw InputError("--inject-shrink must be positive");
  static const std::vector<std::string> known{"all", "conservatism", "theorem2", "tightness", "falsify"};
  if (std::find(known.begin(), known.end(), a.suite) == known.end()) throw InputError("unknown suite " + a.suite);
  std::vector<PropertyResult> res;
  auto want = [&](const char* s) { return a.suite == "all" || a.suite == s; };
  auto append = [&](std::vector<PropertyResult> r) { res.insert(res.end(), r.begin(), r.end()); };
  if (want("conservatism")) append(run_conservatism(loaded, o));
  if (want("theorem2")) append(run_theorem2(loaded, o));
  if (want("tightness")) append(run_tightness(loaded, o));
  if (want("falsify")) append(run_falsify(loaded, o));
  Json rep = results_to_json(res);
  rep["suite"] = a.suite;
  rep["seed"] = a.seed;
  write_text(a.out, rep.dump(2) + "\n", out);
  if (!a.out.empty() && a.out != "-") man.write_for(a.out);
  return rep["pass"].get<bool>() ? kOk : kPropertyFailure;
}

struct EllipseArgs {
  Source src;
  std::string matrix;
  std::string rule;
  std::vector<double> omega;
  int points = 360;
  std::string out;
};

int cmd_ellipse(const EllipseArgs& a, std::ostream& out) {
  if (a.points < 1) throw InputError("--points must be positive");
  Manifest man{"ellipse", {}, 0};
  std::vector<std::pair<std::string, SymMatrix>> shapes;
  if (!a.matrix.empty()) {
    man.config = read_json_file(a.matrix);
    shapes.emplace_back("matrix", sym_from_json(man.config, "matrix"));
  } else {
    man.config = read_json_file(a.src.path());
    const LoadedProblem loaded = problem_from_json(man.config);
    const auto ci = loaded.ci_estimates();
    for (std::size_t i = 0; i < ci.size(); ++i) shapes.emplace_back("P" + std::to_string(i + 1), ci[i].cov);
    if (!a.rule.empty()) {
      const Fuser f(loaded, a.rule);
      const Simplex w = a.omega.empty() ? Simplex::centroid(f.count()) : parse_weights(a.omega, f.count());
      shapes.emplace_back(a.rule, f(w).bound);
    }
  }
  std::ostringstream os;
  os << "label,k,x,y\n";
  for (const auto& [label, m] : shapes) {
    if (m.dim() != 2) throw InputError("ellipse export needs 2×2 covariances");
    const auto pts = ellipse_boundary(m, a.points);
    for (int k = 0; k < a.points; ++k)
      os << label << ',' << k << ',' << format_number(pts[k].x()) << ',' << format_number(pts[k].y()) << '\n';
  }
  write_text(a.out, os.str(), out);
  if (!a.out.empty() && a.out != "-") man.write_for(a.out);
  return kOk;
}

void report_error(std::ostream& err, const std::string& kind, const std::string& message) {
  err << Json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conservative fusion toolkit: CI, SCI and ESCI rules, weight optimization, oracles, simulation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ESCI_VERSION);

  FuseArgs fa;
  auto* fuse = app.add_subcommand("fuse", "Fuse the estimates of a problem file");
  fuse->add_option("--problem,--config", fa.src.file, "Problem JSON");
  fuse->add_option("--builtin", fa.src.builtin, "Built-in problem (fig1, toy-identity)");
  fuse->add_option("--rule", fa.rule, "ci | sci | esci | optimal");
  fuse->add_option("--cost", fa.cost, "trace | logdet | maxeig");
  fuse->add_option("--omega", fa.omega, "Weights (one value for two estimates)")->delimiter(',');
  fuse->add_flag("--optimize", fa.optimize, "Minimize the cost over the weights");
  fuse->add_option("--omega-tol", fa.omega_tol, "Weight tolerance of the optimizer");
  fuse->add_option("--out", fa.out, "Output JSON (default stdout)");

  SweepArgs sa;
  auto* sweep = app.add_subcommand("sweep", "Bounds on a grid of weights for two estimates");
  sweep->add_option("--problem,--config", sa.src.file, "Problem JSON");
  sweep->add_option("--builtin", sa.src.builtin, "Built-in problem");
  sweep->add_option("--rule", sa.rule, "ci | sci | esci | all");
  sweep->add_option("--grid", sa.grid, "Number of weights including both endpoints");
  sweep->add_option("--points", sa.points, "Points per ellipse");
  sweep->add_option("--out", sa.out, "Rows CSV (default stdout)");
  sweep->add_option("--ellipses", sa.ellipses, "Ellipse CSV (default ellipses.csv next to --out)");

  SimulateArgs ma;
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo run of the distributed estimation scenario");
  sim->add_option("--config,--problem", ma.src.file, "Scenario JSON");
  sim->add_option("--builtin", ma.src.builtin, "Built-in scenario (ring4)");
  sim->add_option("--rule", ma.rule, "ci | sci | esci | all (default: from config)");
  sim->add_option("--trials", ma.trials, "Trial count");
  sim->add_option("--steps", ma.steps, "Step count");
  sim->add_option("--seed", ma.seed, "RNG seed");
  sim->add_option("--threads", ma.threads, "Worker threads");
  sim->add_option("--out", ma.out, "Results CSV; with --rule all one file per rule");

  VerifyArgs va;
  auto* ver = app.add_subcommand("verify", "Numerical verification suites for two-estimate problems");
  ver->add_option("--problem,--config", va.src.file, "Problem JSON");
  ver->add_option("--builtin", va.src.builtin, "Built-in problem");
  ver->add_option("--suite", va.suite, "all | conservatism | theorem2 | tightness | falsify");
  ver->add_option("--budget", va.budget, "Random gains tried by the falsifier");
  ver->add_option("--samples", va.samples, "Admissible covariances sampled for conservatism");
  ver->add_option("--seed", va.seed, "RNG seed");
  ver->add_option("--inject-shrink", va.inject_shrink, "Scale fused bounds before checking (test hook)");
  ver->add_option("--out", va.out, "Report JSON (default stdout)");

  EllipseArgs ea;
  auto* ell = app.add_subcommand("ellipse", "Boundary points of covariance ellipses (2-D)");
  ell->add_option("--problem,--config", ea.src.file, "Problem JSON");
  ell->add_option("--builtin", ea.src.builtin, "Built-in problem");
  ell->add_option("--matrix", ea.matrix, "Single matrix JSON instead of a problem");
  ell->add_option("--rule", ea.rule, "Also export the fused bound of this rule");
  ell->add_option("--omega", ea.omega, "Weights for --rule")->delimiter(',');
  ell->add_option("--points", ea.points, "Points per ellipse");
  ell->add_option("--out", ea.out, "Output CSV (default stdout)");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << ESCI_VERSION << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    report_error(err, "Usage", e.what());
    return kInputError;
  }

  try {
    if (fuse->parsed()) return cmd_fuse(fa, out);
    if (sweep->parsed()) return cmd_sweep(sa, out);
    if (sim->parsed()) return cmd_simulate(ma, out);
    if (ver->parsed()) return cmd_verify(va, out);
    if (ell->parsed()) return cmd_ellipse(ea, out);
  } catch (const InputError& e) {
    report_error(err, "InvalidArgument", e.what());
    return kInputError;
  } catch (const FusionError& e) {
    report_error(err, std::string(to_string(e.kind())), e.what());
    return e.is_input_error() ? kInputError : kNumericError;
  } catch (const Json::exception& e) {
    report_error(err, "Schema", e.what());
    return kInputError;
  }
  return kInputError;
}

}  // namespace esci::cli

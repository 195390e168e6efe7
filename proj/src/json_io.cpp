#include "esci/json_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace esci {

namespace {

[[noreturn]] void schema(std::string_view what, const std::string& msg) {
  fail(ErrorKind::Schema, std::string(what) + ": " + msg);
}

const Json& field(const Json& j, const char* key, std::string_view what) {
  if (!j.is_object() || !j.contains(key)) schema(what, std::string("missing key \"") + key + "\"");
  return j.at(key);
}

double number(const Json& j, std::string_view what) {
  if (!j.is_number()) schema(what, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(ErrorKind::NonFinite, std::string(what) + " is not finite");
  return v;
}

int integer(const Json& j, std::string_view what) {
  if (!j.is_number_integer()) schema(what, "expected an integer");
  return j.get<int>();
}

Mat rows_of(const Json& rows, std::string_view what) {
  if (!rows.is_array() || rows.empty()) schema(what, "expected a non-empty list of rows");
  const std::size_t m = rows.size();
  if (!rows[0].is_array() || rows[0].empty()) schema(what, "rows must be non-empty lists");
  const std::size_t n = rows[0].size();
  Mat out(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    if (!rows[i].is_array() || rows[i].size() != n) schema(what, "ragged rows");
    for (std::size_t k = 0; k < n; ++k) out(i, k) = number(rows[i][k], what);
  }
  return out;
}

}  // namespace

SymMatrix sym_from_json(const Json& j, std::string_view what) {
  if (j.is_number()) return SymMatrix::scaled_identity(1, number(j, what));
  const Mat m = rows_of(field(j, "rows", what), what);
  if (m.rows() != m.cols()) schema(what, "matrix must be square");
  if (j.contains("dim") && integer(j.at("dim"), what) != m.rows()) schema(what, "dim disagrees with rows");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12) schema(what, "matrix is not symmetric");
  return SymMatrix(m);
}

Json to_json(const SymMatrix& m) {
  Json j;
  j["dim"] = m.dim();
  j["rows"] = mat_to_json(m.mat());
  return j;
}

Mat mat_from_json(const Json& j, std::string_view what) {
  if (j.is_object()) return rows_of(field(j, "rows", what), what);
  return rows_of(j, what);
}

Json mat_to_json(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json r = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) r.push_back(m(i, k));
    rows.push_back(std::move(r));
  }
  return rows;
}

Vec vec_from_json(const Json& j, std::string_view what) {
  if (!j.is_array() || j.empty()) schema(what, "expected a non-empty number list");
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = number(j[i], what);
  return v;
}

Json vec_to_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

// ---------------------------------------------------------------------------
// Problems

std::vector<Estimate> LoadedProblem::ci_estimates() const {
  if (common) return common->ci_estimates();
  std::vector<Estimate> out;
  for (const auto& e : generic.estimates) out.push_back(Estimate{e.mean, e.total_cov()});
  return out;
}

std::vector<SplitEstimate> LoadedProblem::sci_estimates() const {
  if (common) return common->sci_split();
  return generic.estimates;
}

namespace {

void check_d(const Json& j, int d) {
  if (j.contains("d") && integer(j.at("d"), "d") != d) schema("d", "disagrees with the estimates");
}

LoadedProblem generic_from_json(const Json& j) {
  const Json& ests = field(j, "estimates", "problem");
  if (!ests.is_array() || ests.empty()) schema("estimates", "expected a non-empty list");
  std::vector<SplitEstimate> list;
  for (const auto& e : ests)
    list.push_back(SplitEstimate{vec_from_json(field(e, "mean", "estimate"), "mean"),
                                 sym_from_json(field(e, "unknownCov", "estimate"), "unknownCov"),
                                 sym_from_json(field(e, "knownCov", "estimate"), "knownCov")});
  const int d = static_cast<int>(list.front().mean.size());
  check_d(j, d);
  const int n = static_cast<int>(list.size());
  FusionProblem p = j.contains("knownCentralCov")
                        ? FusionProblem{list, BlockMatrix(d, sym_from_json(j.at("knownCentralCov"), "knownCentralCov")),
                                        std::nullopt}
                        : FusionProblem::independent(list);
  if (p.knownCentralCov.block_count() != n) schema("knownCentralCov", "must be Nd×Nd");
  if (j.contains("crossCov") && !j.at("crossCov").is_null()) {
    Mat c = mat_from_json(j.at("crossCov"), "crossCov");
    if (c.rows() != n * d || c.cols() != n * d) schema("crossCov", "must be Nd×Nd");
    p.crossCov = std::move(c);
  }
  p.validate();
  return LoadedProblem{std::move(p), std::nullopt};
}

LoadedProblem common_from_json(const Json& j) {
  const Json& ests = field(j, "estimates", "problem");
  if (!ests.is_array() || ests.empty()) schema("estimates", "expected a non-empty list");
  CommonNoiseProblem p{{}, sym_from_json(field(j, "noiseCov", "problem"), "noiseCov")};
  for (const auto& e : ests)
    p.estimates.push_back(CommonNoiseEstimate{vec_from_json(field(e, "mean", "estimate"), "mean"),
                                              sym_from_json(field(e, "unknownCov", "estimate"), "unknownCov"),
                                              sym_from_json(field(e, "indepCov", "estimate"), "indepCov"),
                                              mat_from_json(field(e, "noiseGain", "estimate"), "noiseGain")});
  check_d(j, p.state_dim());
  FusionProblem g = p.assemble();
  return LoadedProblem{std::move(g), std::move(p)};
}

LoadedProblem kalman_from_json(const Json& j) {
  const Mat f = mat_from_json(field(j, "F", "problem"), "F");
  const int d = static_cast<int>(f.rows());
  if (f.cols() != d) schema("F", "must be square");
  const SymMatrix q = sym_from_json(field(j, "Q", "problem"), "Q");
  if (q.dim() != d) schema("Q", "must be d×d");
  const Json& nodes = field(j, "nodes", "problem");
  if (!nodes.is_array() || nodes.empty()) schema("nodes", "expected a non-empty list");
  CommonNoiseProblem p{{}, q};
  for (const auto& n : nodes) {
    const Mat h = mat_from_json(field(n, "H", "node"), "H");
    const SymMatrix r = sym_from_json(field(n, "R", "node"), "R");
    const SymMatrix prior = sym_from_json(field(n, "prior", "node"), "prior");
    if (h.cols() != d || r.dim() != h.rows() || prior.dim() != d) fail(ErrorKind::DimensionMismatch, "node sizes");
    const Vec mean = n.contains("mean") ? vec_from_json(n.at("mean"), "mean") : Vec::Zero(d);
    if (mean.size() != d) fail(ErrorKind::DimensionMismatch, "node mean size");
    const Mat fpf = f * prior.mat() * f.transpose();
    const SymMatrix pred = SymMatrix(fpf) + q;
    const SymMatrix s(h * pred.mat() * h.transpose() + r.mat());
    const Mat w = spd_solve(s, h * pred.mat()).transpose();  // P Hᵀ S⁻¹
    const Mat iwh = Mat::Identity(d, d) - w * h;
    p.estimates.push_back(CommonNoiseEstimate{mean, SymMatrix(iwh * fpf * iwh.transpose()),
                                              SymMatrix(w * r.mat() * w.transpose()), -iwh});
  }
  FusionProblem g = p.assemble();
  return LoadedProblem{std::move(g), std::move(p)};
}

}  // namespace

LoadedProblem problem_from_json(const Json& j) {
  if (!j.is_object()) schema("problem", "expected an object");
  std::string kind;
  if (j.contains("kind")) {
    if (!j.at("kind").is_string()) schema("kind", "expected a string");
    kind = j.at("kind").get<std::string>();
  } else if (j.contains("noiseCov")) {
    kind = "common-noise";
  } else if (j.contains("nodes")) {
    kind = "kalman-split";
  } else {
    kind = "fusion";
  }
  if (kind == "fusion") return generic_from_json(j);
  if (kind == "common-noise") return common_from_json(j);
  if (kind == "kalman-split") return kalman_from_json(j);
  schema("kind", "unknown problem kind \"" + kind + "\"");
}

Json problem_to_json(const FusionProblem& p) {
  Json j;
  j["kind"] = "fusion";
  j["d"] = p.state_dim();
  j["estimates"] = Json::array();
  for (const auto& e : p.estimates)
    j["estimates"].push_back(
        {{"mean", vec_to_json(e.mean)}, {"unknownCov", to_json(e.unknownCov)}, {"knownCov", to_json(e.knownCov)}});
  j["knownCentralCov"] = to_json(p.knownCentralCov.full());
  if (p.crossCov) j["crossCov"] = mat_to_json(*p.crossCov);
  return j;
}

Json problem_to_json(const CommonNoiseProblem& p) {
  Json j;
  j["kind"] = "common-noise";
  j["d"] = p.state_dim();
  j["estimates"] = Json::array();
  for (const auto& e : p.estimates)
    j["estimates"].push_back({{"mean", vec_to_json(e.mean)},
                              {"unknownCov", to_json(e.unknownCov)},
                              {"indepCov", to_json(e.indepCov)},
                              {"noiseGain", mat_to_json(e.noiseGain)}});
  j["noiseCov"] = to_json(p.noiseCov);
  return j;
}

// ---------------------------------------------------------------------------
// Scenario

ScenarioConfig scenario_from_json(const Json& j) {
  if (!j.is_object()) schema("scenario", "expected an object");
  ScenarioConfig c;
  c.dt = number(field(j, "dt", "scenario"), "dt");
  c.F = j.contains("F") ? mat_from_json(j.at("F"), "F") : ScenarioConfig::constant_acceleration_F(c.dt);
  c.q = j.contains("q") ? vec_from_json(j.at("q"), "q") : ScenarioConfig::constant_acceleration_q(c.dt);
  c.sigmaW2 = number(field(j, "sigmaW2", "scenario"), "sigmaW2");
  const Json& nodes = field(j, "nodes", "scenario");
  if (!nodes.is_array() || nodes.empty()) schema("nodes", "expected a non-empty list");
  for (const auto& n : nodes) {
    const Json& hj = field(n, "H", "node");
    Mat h = hj.is_array() && !hj.empty() && hj[0].is_number() ? Mat(vec_from_json(hj, "H").transpose())
                                                              : mat_from_json(hj, "H");
    c.nodes.push_back(SensorModel{std::move(h), number(field(n, "R", "node"), "R")});
  }
  const Json& adj = field(j, "adjacency", "scenario");
  if (!adj.is_array()) schema("adjacency", "expected a matrix");
  for (const auto& row : adj) {
    if (!row.is_array()) schema("adjacency", "expected rows");
    std::vector<bool> r;
    for (const auto& v : row) {
      if (v.is_boolean())
        r.push_back(v.get<bool>());
      else if (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1))
        r.push_back(v.get<int>() == 1);
      else
        schema("adjacency", "entries must be 0/1 or booleans");
    }
    c.adjacency.push_back(std::move(r));
  }
  if (j.contains("steps")) c.steps = integer(j.at("steps"), "steps");
  if (j.contains("trials")) c.trials = integer(j.at("trials"), "trials");
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer()) schema("seed", "expected an integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("rule")) {
    const auto r = parse_rule(j.at("rule").is_string() ? j.at("rule").get<std::string>() : "");
    if (!r) schema("rule", "expected ci, sci or esci");
    c.rule = *r;
  }
  const int d = static_cast<int>(c.F.rows());
  c.x0 = j.contains("x0") ? vec_from_json(j.at("x0"), "x0") : Vec::Zero(d);
  if (j.contains("P0")) {
    const Json& p0 = j.at("P0");
    c.P0 = p0.is_number() ? SymMatrix::scaled_identity(d, number(p0, "P0")) : sym_from_json(p0, "P0");
  } else {
    c.P0 = SymMatrix::scaled_identity(d, 10.0);
  }
  c.validate();
  return c;
}

Json fused_to_json(const FusedResult& r) {
  Json j;
  j["mean"] = vec_to_json(r.mean);
  j["bound"] = to_json(r.bound);
  j["gain"] = mat_to_json(r.gain);
  j["omega"] = vec_to_json(r.weights);
  return j;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::InvalidArgument, "cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    fail(ErrorKind::Schema, path + ": " + e.what());
  }
}

std::uint64_t config_hash(const Json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

}  // namespace esci

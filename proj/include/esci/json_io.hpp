#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "esci/dist_sim.hpp"
#include "esci/fusion_rules.hpp"

namespace esci {

using Json = nlohmann::json;

/// {"dim": d, "rows": [[...], ...]}; rejects asymmetry beyond 1e−12 absolute.
SymMatrix sym_from_json(const Json& j, std::string_view what);
Json to_json(const SymMatrix& m);

/// General matrix as a list of rows (also accepts the {"rows": …} object form).
Mat mat_from_json(const Json& j, std::string_view what);
Json mat_to_json(const Mat& m);

Vec vec_from_json(const Json& j, std::string_view what);
Json vec_to_json(const Vec& v);

/// A fusion problem as loaded from disk. `common` is set for common-noise and Kalman-split
/// inputs; `generic` is always the assembled FusionProblem.
struct LoadedProblem {
  FusionProblem generic;
  std::optional<CommonNoiseProblem> common;

  /// All-unknown view for CI.
  std::vector<Estimate> ci_estimates() const;
  /// Independent-known view for SCI.
  std::vector<SplitEstimate> sci_estimates() const;
};

/// Accepts three layouts, selected by "kind" (or inferred from keys):
/// "fusion": {"d", "estimates":[{"mean","unknownCov","knownCov"}], "knownCentralCov", "crossCov"?}
/// "common-noise": {"d", "estimates":[{"mean","unknownCov","indepCov","noiseGain"}], "noiseCov"}
/// "kalman-split": {"F", "Q", "nodes":[{"H","R","prior","mean"?}]}, one predict/update per node.
LoadedProblem problem_from_json(const Json& j);
Json problem_to_json(const FusionProblem& p);
Json problem_to_json(const CommonNoiseProblem& p);

ScenarioConfig scenario_from_json(const Json& j);

Json fused_to_json(const FusedResult& r);

Json read_json_file(const std::string& path);

/// FNV-1a over the canonical (sorted-key) serialization.
std::uint64_t config_hash(const Json& j);
std::string hex64(std::uint64_t v);

}  // namespace esci

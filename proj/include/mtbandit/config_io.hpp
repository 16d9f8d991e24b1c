#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtbandit/model.hpp"

namespace mtbandit {

/// Instance recipe from a config file. Fields set to "canonical" (or
/// "groups"/"uniform") are generated; explicit matrices are used verbatim.
///
/// Schema:
///   type: "linear" | "contextual"
///   d, k: dimensions; M: task count (optional when predictions are explicit)
///   arms: "canonical" | [[x_1], ..., [x_n]]                       (linear)
///   contexts, actions: sizes                                       (contextual)
///   features: "canonical" | [[[φ(s,a)] per action] per context]   (contextual)
///   distribution: "uniform" | [p_s]                                (contextual)
///   extractor: "canonical" | d×k rows
///   predictions: "groups" | k×M rows
///   noise: {kind: "standard-gaussian"|"scaled-gaussian"|"bounded-uniform", scale, test_mode}
struct InstanceSpec {
  std::string type = "linear";
  int d = 0;
  int k = 0;
  std::optional<int> m;
  int contexts = 1;
  int actions = 1;
  std::optional<MatrixXd> arms;
  std::optional<std::vector<MatrixXd>> features;
  std::optional<VectorXd> distribution;
  std::optional<MatrixXd> extractor;
  std::optional<MatrixXd> predictions;
  NoiseModel noise;
};

/// Throws CONFIG_INVALID with the offending field path.
InstanceSpec parse_instance_spec(const nlohmann::json& j);
nlohmann::json to_json(const InstanceSpec& spec);

/// Builds the instance, overriding M when given. Throws CONFIG_INVALID when
/// the override conflicts with explicit predictions.
BanditInstance build_linear_instance(const InstanceSpec& spec, std::optional<int> m = std::nullopt);
ContextualInstance build_contextual_instance(const InstanceSpec& spec, std::optional<int> m = std::nullopt);

/// Unknown keys are rejected. Missing keys keep their defaults.
RunConfig parse_run_config(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);

/// Reads a JSON file; throws CONFIG_INVALID on I/O or syntax errors.
nlohmann::json read_json_file(const std::string& path);

}  // namespace mtbandit

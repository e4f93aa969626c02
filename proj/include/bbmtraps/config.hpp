#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "bbmtraps/branching.hpp"
#include "bbmtraps/estimators.hpp"
#include "bbmtraps/simulator.hpp"
#include "bbmtraps/trap_field.hpp"

namespace bbmtraps {

using Json = nlohmann::json;

/// {"0": 0.25, "2": 0.75}
OffspringLaw offspring_law_from_json(const Json& j);
Json to_json(const OffspringLaw& law);

/// {"d":2,"kind":"uniform","v":1.0,"a":0.5} or {"d":1,"kind":"radial","l":0.5,"x0":0.005,"a":0.5}
TrapFieldSpec trap_field_from_json(const Json& j);
Json to_json(const TrapFieldSpec& spec);

Json to_json(const Statistic& s);
Json to_json(const EstimateResult& e);

struct RateSettings {
  double l = 1.0;
  double epsilon = 0.5;
  double tol = 1e-9;
};

/// Validated experiment description. Every optional field is resolved to a
/// concrete value so that resolved() reproduces the run exactly.
struct ExperimentConfig {
  BranchingParams branching;
  std::optional<TrapFieldSpec> field;
  SimulationConfig simulation;
  long replicates = 1000;
  std::uint64_t seed = 0;
  Conditioning conditioning = Conditioning::kSurvival;
  double lookahead = -1.0;
  std::vector<Statistic> statistics;
  std::optional<RateSettings> rate;
  std::string output_dir = ".";

  Json resolved() const;
  /// 16 hex digits identifying resolved().
  std::string hash() const;
  MCConfig mc_config(int jobs) const;
};

/// Throws ConfigError on unknown keys, wrong types, or invalid values.
ExperimentConfig experiment_config_from_json(const Json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// FNV-1a 64-bit digest as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace bbmtraps

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "depin/depinning.hpp"

namespace depin {

/// Everything a subcommand needs. Keys of the JSON schema are flat and map
/// one to one onto fields here and onto CLI flags (underscores become dashes).
struct ExperimentConfig {
  ObstacleParams obstacles{1.0, 0.1, 0.2, 2.0, 0};  // seed doubles as the master seed
  KineticRelation kinetics;
  SimConfig sim;
  BisectionConfig bisection;
  double width = 0.0;  // <= 0: width_spacings / sqrt(rho)
  double width_spacings = 24.0;
  std::optional<double> force;  // key "F"
  std::vector<double> densities{0.5, 1.0, 2.0, 4.0, 8.0};
  std::size_t n_seeds = 12;
  std::string out = ".";
  std::size_t workers = 1;
  double p_c = 0.9375;
  std::size_t bootstrap = 1000;
  double path_h_min = 0.0;
  double path_height = 0.0;
  int j_max = 64;

  /// Flag or file values that replaced a default or file value, by key.
  nlohmann::json provenance = nlohmann::json::object();

  void validate() const;
  double resolved_width() const;
  /// Canonical JSON of every key (sorted).
  nlohmann::json to_json() const;
  /// FNV-1a 64 of the canonical JSON without the execution-only keys
  /// (workers, out), as 16 hex digits.
  std::string hash() const;

  SweepConfig sweep() const;
  SandwichConfig sandwich() const;
};

/// The accepted keys, in schema order.
const std::vector<std::string>& config_keys();

/// Merges `file` (may be null) and `overrides`, applies defaults and
/// validates. Unknown keys and ill-typed values throw ValidationError naming
/// the key; overridden keys are listed in the provenance block.
ExperimentConfig parse_config(const nlohmann::json& file, const nlohmann::json& overrides = {});

/// Reads a JSON file and calls parse_config.
ExperimentConfig load_config(const std::string& path, const nlohmann::json& overrides = {});

/// Converts a flag string to the JSON value of its key ("0.5,1,2" for lists).
nlohmann::json flag_value(const std::string& key, const std::string& text);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace depin

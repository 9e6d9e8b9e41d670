#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "treedp/generators.hpp"
#include "treedp/risk_sharing.hpp"
#include "treedp/solver.hpp"

namespace treedp {

/// Everything a subcommand needs, assembled from one JSON config file.
/// Presets: "risk-constrained-consumption" (consumption under a one-step
/// entropic risk cap), "wealth-entropic" (entropic certainty equivalents
/// with wealth-dependent risk aversion over induced level-set controls) and
/// "risk-sharing" (proportional allocation of an aggregate endowment).
struct BuildOutput {
  std::uint64_t seed = 0;
  std::string config_hash;
  double x0 = 1.0;
  GridConfig grid;
  std::optional<Problem> problem;
  std::optional<double> k_bound;  // set when level-set controls were induced
  std::optional<SharingProblem> sharing;
};

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<int> grid_points;
  std::optional<double> control_resolution;
};

BuildOutput load_config(const std::string& path, const CliOverrides& overrides = {});

/// Parses a config from raw JSON text (the hash is computed over the text).
BuildOutput build_from_text(const std::string& text, const CliOverrides& overrides = {});

/// FNV-1a hash of the config bytes, as 16 hex characters.
std::string config_hash(const std::string& bytes);

}  // namespace treedp

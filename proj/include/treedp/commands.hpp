#pragma once

#include <iosfwd>
#include <string>

#include "treedp/config.hpp"

namespace treedp {

// Exit codes shared across subcommands: 0 success, 1 failed checks,
// 2 config errors, 3 infeasibility or divergence.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitInfeasible = 3;

struct SolveOptions {
  bool dump_controls = false;
  int refinement_levels = 2;
};

int run_solve(const std::string& config_path, const std::string& out_dir,
              const CliOverrides& overrides, const SolveOptions& options, std::ostream& log);

int run_verify(const std::string& config_path, const CliOverrides& overrides, std::ostream& log);

int run_share(const std::string& config_path, const std::string& out_dir,
              const CliOverrides& overrides, std::ostream& log);

int run_randomset(std::uint64_t seed, std::size_t trials, std::ostream& log);

}  // namespace treedp

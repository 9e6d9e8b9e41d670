#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "treedp/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Scenario-tree stochastic control: solve, verify, share, randomset"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  treedp::CliOverrides overrides;
  std::uint64_t seed_flag = 0;
  bool seed_set = false;
  int workers = 0;
  bool workers_set = false;
  int grid_points = 0;
  bool grid_set = false;
  double control_res = 0.0;
  bool res_set = false;

  auto add_common = [&](CLI::App* cmd, bool needs_out) {
    cmd->add_option("--config", config_path, "problem config (JSON)")->required();
    if (needs_out) cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed_flag, "seed override")->each([&](const std::string&) {
      seed_set = true;
    });
    cmd->add_option("--workers", workers, "worker threads (0 = hardware)")
        ->each([&](const std::string&) { workers_set = true; });
    cmd->add_option("--grid-points", grid_points, "state grid points per node")
        ->each([&](const std::string&) { grid_set = true; });
    cmd->add_option("--control-res", control_res, "control grid spacing h")
        ->each([&](const std::string&) { res_set = true; });
  };

  treedp::SolveOptions solve_options;
  auto* solve = app.add_subcommand("solve", "run the backward recursion and extract a policy");
  add_common(solve, true);
  solve->add_flag("--dump-controls", solve_options.dump_controls,
                  "also export the discretized control grids");
  solve->add_option("--refine", solve_options.refinement_levels,
                    "refinement halvings reported in the summary");

  auto* verify = app.add_subcommand("verify", "run the condition checkers");
  add_common(verify, false);

  auto* share = app.add_subcommand("share", "closed-form risk sharing with cross-check");
  add_common(share, true);

  std::uint64_t rs_seed = 42;
  std::size_t rs_trials = 100;
  auto* randomset = app.add_subcommand("randomset", "set-valued correspondence suites");
  randomset->add_option("--seed", rs_seed, "suite seed");
  randomset->add_option("--trials", rs_trials, "randomized instances");

  CLI11_PARSE(app, argc, argv);

  if (seed_set) overrides.seed = seed_flag;
  if (workers_set) overrides.workers = workers;
  if (grid_set) overrides.grid_points = grid_points;
  if (res_set) overrides.control_resolution = control_res;

  if (solve->parsed())
    return treedp::run_solve(config_path, out_dir, overrides, solve_options, std::cout);
  if (verify->parsed()) return treedp::run_verify(config_path, overrides, std::cout);
  if (share->parsed()) return treedp::run_share(config_path, out_dir, overrides, std::cout);
  if (randomset->parsed()) return treedp::run_randomset(rs_seed, rs_trials, std::cout);
  return treedp::kExitConfig;
}

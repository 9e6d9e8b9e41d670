#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "treedp/check_report.hpp"
#include "treedp/generators.hpp"

namespace treedp {

/// Argmax ties within this window are broken towards the lexicographically
/// smallest control.
inline constexpr double kTieTol = 1e-9;

struct GridConfig {
  int state_points = 129;           // grid size per node and stage
  double control_resolution = 0.1;  // spacing h of the control grids
  double polish_tol = 1e-7;         // step floor of the local refinement
  bool polish = true;
  std::optional<std::pair<double, double>> state_bounds;  // root interval override
  int workers = 0;                  // 0 = hardware concurrency
};

/// Per-node value function on a sorted state grid with piecewise-linear,
/// clamped-at-the-edges interpolation. Grids may be degenerate (one point).
class ValueFunction {
public:
  ValueFunction(int stage, std::vector<std::vector<double>> grids,
                std::vector<std::vector<double>> values);

  int stage() const { return stage_; }
  std::size_t node_count() const { return grids_.size(); }
  std::span<const double> grid(std::size_t node_ordinal) const { return grids_.at(node_ordinal); }
  std::span<const double> values(std::size_t node_ordinal) const { return values_.at(node_ordinal); }

  double operator()(std::size_t node_ordinal, double x) const;

private:
  int stage_ = 0;
  std::vector<std::vector<double>> grids_;
  std::vector<std::vector<double>> values_;
};

/// Optimal controls aligned with the value-function grids.
class Policy {
public:
  Policy() = default;
  explicit Policy(int horizon) : per_stage_(static_cast<std::size_t>(horizon)) {}

  std::span<const double> at(int stage, std::size_t node_ordinal, std::size_t grid_index) const {
    return per_stage_.at(static_cast<std::size_t>(stage)).at(node_ordinal).at(grid_index);
  }

  std::vector<std::vector<std::vector<std::vector<double>>>>& storage() { return per_stage_; }
  const std::vector<std::vector<std::vector<std::vector<double>>>>& storage() const {
    return per_stage_;
  }

private:
  // [stage][node ordinal][grid index] -> control vector
  std::vector<std::vector<std::vector<std::vector<double>>>> per_stage_;
};

struct SolveDiagnostics {
  bool exact_mode = false;
  std::vector<std::string> warnings;
};

struct SolveResult {
  std::vector<ValueFunction> values;  // stages 0..T
  Policy policy;
  SolveDiagnostics diagnostics;
};

/// Backward recursion y_t(x) = max_{z in Theta_t(x)} u_t(x, y_{t+1}(v_t(x,z)), z)
/// with y_T from the terminal generator.
///
/// With explicit finite control grids at every stage the solver enumerates
/// the exact reachable states instead of interpolating, so its value agrees
/// with exhaustive enumeration to float accuracy. Otherwise states live on
/// per-stage grids propagated forward from x0 (10% padding) and the inner
/// maximization runs over discretized controls refined by pattern search.
SolveResult solve_backward(const Problem& problem, double x0, const GridConfig& config);

struct Trajectory {
  /// Indexed by node id; empty entries for stage-T controls.
  std::vector<double> state;
  std::vector<std::vector<double>> control;
  double achieved_value = 0.0;
  double y0 = 0.0;
};

/// Forward pass re-running the inner maximization at the exact realized
/// states (not the nearest grid point) against the solved continuation.
Trajectory extract_policy(const Problem& problem, const SolveResult& result, double x0,
                          const GridConfig& config);

struct BruteForceResult {
  double value = 0.0;
  /// Best control per non-terminal node id.
  std::vector<std::vector<double>> controls;
};

/// Exhaustive enumeration over all per-node control assignments of a problem
/// with explicit finite control grids; guards the assignment count at 1e7.
BruteForceResult brute_force_value(const Problem& problem, double x0);

/// Sandwich bound 0 <= y_t(x) - x <= (T-t) K at every grid point (tolerance
/// 1e-6), plus membership of every stored optimal control in the level set
/// {z : u_t(x, v_t(x,z), z) >= x - (T-t-1) K}.
CheckReport verify_k_bound(const Problem& problem, const SolveResult& result, double k_bound);

struct RefinementDiag {
  std::vector<double> y0;      // value at x0 per refinement level
  std::vector<double> deltas;  // |y0[l+1] - y0[l]|
  double ratio = 0.0;          // deltas[0] / deltas[1] when defined
};

/// Solves at (n, h), (2n-1, h/2), (4n-3, h/4), ... and reports the change in
/// y_0(x0) per halving; the ratio of successive deltas is the empirical
/// convergence diagnostic.
RefinementDiag refinement_study(const Problem& problem, double x0, const GridConfig& base,
                                int levels = 2);

}  // namespace treedp

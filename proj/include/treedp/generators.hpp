#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "treedp/check_report.hpp"
#include "treedp/conditional.hpp"
#include "treedp/control_sets.hpp"

namespace treedp {

/// One-step state dynamics x_{t+1} = v(x_t, z_t), evaluated per child node
/// (the child's shock carries the realized increment).
class ForwardGenerator {
public:
  enum class Kind { WealthConsumption, SelfFinancing, PortfolioIdentity, Custom };
  using StepFn =
      std::function<double(const ScenarioTree&, int child_id, double x, std::span<const double> z)>;

  /// x' = x + theta . dS - c with z = (theta, c).
  static ForwardGenerator wealth_consumption();
  /// x' = x + theta . dS.
  static ForwardGenerator self_financing();
  /// x' = z (scalar control becomes the next state).
  static ForwardGenerator portfolio_identity();
  static ForwardGenerator custom(StepFn fn);

  Kind kind() const { return kind_; }
  double step(const ScenarioTree& tree, int child_id, double x, std::span<const double> z) const;
  ConditionalValue evaluate(const ConditionalValue& x, const ConditionalValue& z) const;

  /// Natural control dimension at a stage (shock dimension plus the
  /// consumption coordinate where applicable).
  int control_dim(const ScenarioTree& tree, int stage) const;

private:
  Kind kind_ = Kind::SelfFinancing;
  StepFn fn_;
};

/// One-step aggregator turning the continuation value on the children of a
/// stage-t node into a stage-t value.
class BackwardGenerator {
public:
  enum class Kind { EntropicWealth, ScalingFamily, Additive, Custom };
  using RewardFn =
      std::function<double(const ScenarioTree&, int node_id, double x, std::span<const double> z)>;
  using AggregateFn = std::function<double(const ScenarioTree&, int node_id, double x,
                                           std::span<const double> child_y,
                                           std::span<const double> z)>;

  /// u(x, y) = -(1/gamma(x)) log E[exp(-gamma(x) y)] with the decreasing,
  /// continuous risk-aversion profile
  /// gamma(x) = gamma_min + (gamma_max - gamma_min) / (1 + max(x, 0)).
  static BackwardGenerator entropic_wealth(double gamma_min, double gamma_max);
  /// u(x, y) = x g(y / x) for x > 0, with the same log-exp kernel g.
  static BackwardGenerator scaling_entropic();
  /// u(x, y, z) = E[y] + r(x, z).
  static BackwardGenerator additive(RewardFn reward);
  static BackwardGenerator custom(AggregateFn fn);

  Kind kind() const { return kind_; }
  double gamma_at(double x) const;
  double aggregate(const ScenarioTree& tree, int node_id, double x, std::span<const double> child_y,
                   std::span<const double> z) const;
  /// Lifted evaluation: y at stage t+1, x (and optionally z) at stage t.
  ConditionalValue evaluate(const ConditionalValue& x, const ConditionalValue& y,
                            const ConditionalValue* z = nullptr) const;

private:
  Kind kind_ = Kind::EntropicWealth;
  double gamma_min_ = 1.0, gamma_max_ = 1.0;
  RewardFn reward_;
  AggregateFn fn_;
};

class TerminalGenerator {
public:
  using ValueFn = std::function<double(const ScenarioTree&, int node_id, double x)>;

  static TerminalGenerator identity();
  static TerminalGenerator custom(ValueFn fn);

  bool is_identity() const { return !fn_; }
  double value(const ScenarioTree& tree, int node_id, double x) const {
    return fn_ ? fn_(tree, node_id, x) : x;
  }

private:
  ValueFn fn_;
};

/// A full control problem on a scenario tree: per-stage backward generators
/// and control sets, one forward generator, a terminal value.
struct Problem {
  TreePtr tree;
  ForwardGenerator forward;
  std::vector<BackwardGenerator> backward;
  TerminalGenerator terminal;
  std::vector<ControlSetSpec> controls;

  void validate() const;
  int horizon() const { return tree->horizon(); }
};

struct GeneratorCheckConfig {
  std::size_t trials = 24;
  std::uint64_t seed = 1;
  /// Also run the monotone-regime conditions (state monotonicity, zero
  /// identity, translation invariance, loss sensitivity, ...).
  bool monotone_regime = false;
};

/// Condition battery for the generators; labels carry the short condition
/// codes (v1..v6, u1..u7, u2') used throughout the reports.
CheckReport check_generator_conditions(const Problem& problem, const GeneratorCheckConfig& config);

struct KEstimate {
  double overall = 0.0;
  std::vector<double> per_stage;
};

/// Largest one-step advantage sup_z u_t(x, v_t(x, z), z) - x over the state
/// battery, maximized by pattern search. Throws DivergenceError when the
/// supremum diverges (no finite one-step bound exists).
KEstimate estimate_K(const TreePtr& tree, const ForwardGenerator& forward,
                     const std::vector<BackwardGenerator>& backward,
                     std::span<const double> x_battery);

/// Level sets {z : u_t(x, v_t(x, z), z) >= x - (T-t-1) K}, one per stage.
/// In the monotone regime these are exactly the sets the optimizer lives in.
std::vector<ControlSetSpec> induced_control_sets(const TreePtr& tree,
                                                 const ForwardGenerator& forward,
                                                 const std::vector<BackwardGenerator>& backward,
                                                 double k_bound);

}  // namespace treedp

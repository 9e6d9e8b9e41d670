#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "treedp/check_report.hpp"
#include "treedp/conditional.hpp"
#include "treedp/risk.hpp"

namespace treedp {

/// Feasibility slack absorbing float noise in constraint evaluation; a
/// control on the constraint boundary counts as feasible.
inline constexpr double kFeasibilitySlack = 1e-9;

/// State-dependent control set at a stage: which controls z are admissible
/// at a node when the current state is x. Specs are immutable; feasibility
/// and discretization queries are pure and nodewise.
class ControlSetSpec {
public:
  enum class Kind { Box, RiskConstrained, UpperLevel, ExplicitGrid, Custom };

  using DimFn = std::function<int(std::size_t node_ordinal, double x)>;
  using BoundFn = std::function<double(std::size_t node_ordinal, double x, int coord)>;
  /// Constraint score for upper-level sets; z is feasible iff
  /// score(node, x, z) >= x - threshold_offset.
  using ScoreFn = std::function<double(int node_id, double x, std::span<const double> z)>;
  using PredicateFn = std::function<bool(int node_id, double x, std::span<const double> z,
                                         double slack)>;

  static ControlSetSpec box(TreePtr tree, int stage, std::vector<double> lower,
                            std::vector<double> upper);
  static ControlSetSpec box(TreePtr tree, int stage, DimFn dim, BoundFn lower, BoundFn upper);

  /// {(theta, c) : rho(theta . dS) <= x - c, 0 <= c <= x}; without the
  /// consumption coordinate the constraint is rho(theta . dS) <= x. The
  /// increments dS default to the child shock vectors of the tree.
  static ControlSetSpec risk_constrained(TreePtr tree, int stage, ConditionalRiskMeasure rho,
                                         bool with_consumption,
                                         std::optional<ConditionalValue> delta_s = std::nullopt);

  static ControlSetSpec upper_level(TreePtr tree, int stage, int dim, ScoreFn score,
                                    double threshold_offset);

  /// points[node_ordinal] lists the admissible control vectors at that node.
  static ControlSetSpec explicit_grid(TreePtr tree, int stage,
                                      std::vector<std::vector<std::vector<double>>> points);

  static ControlSetSpec custom(TreePtr tree, int stage, int dim, PredicateFn predicate);

  Kind kind() const { return kind_; }
  int stage() const { return stage_; }
  const TreePtr& tree_ptr() const { return tree_; }

  int dim(std::size_t node_ordinal, double x) const;

  bool feasible(std::size_t node_ordinal, double x, std::span<const double> z,
                double slack = kFeasibilitySlack) const;

  /// Radius M with ||z|| <= M for every feasible z, found by ray scanning
  /// (axis, diagonal and seeded random directions; doubling then bisection
  /// to 1e-6; safety factor 1.1). Throws UnboundedError after 60 doublings.
  double bounding_radius(std::size_t node_ordinal, double x) const;

  /// Feasible grid with spacing <= h inside the bounding region, augmented
  /// with the all-zero anchor when feasible. Throws ResolutionError when the
  /// filtered grid is empty, suggesting a finer h.
  std::vector<std::vector<double>> discretize(std::size_t node_ordinal, double x, double h) const;

  const std::vector<std::vector<double>>& grid_points(std::size_t node_ordinal) const;

  /// Smallest state with a guaranteed-nonempty control set, when the kind
  /// has a sharp domain edge (consumption caps need x >= 0). States below it
  /// have no admissible control at all.
  std::optional<double> state_floor() const;

  // Lifted, nodewise variants.
  ConditionalValue is_feasible(const ConditionalValue& x, const ConditionalValue& z) const;
  ConditionalValue bounding_radius(const ConditionalValue& x) const;

  /// Finite surrogate for graph regularity: along a convergent state
  /// sequence with feasible picks, the limiting pair stays feasible
  /// (tolerance 1e-7) and the radii stay uniformly bounded.
  CheckReport check_c4_surrogate(std::span<const ConditionalValue> x_seq,
                                 std::span<const ConditionalValue> z_seq) const;

private:
  ControlSetSpec() = default;
  int node_id(std::size_t node_ordinal) const;

  TreePtr tree_;
  int stage_ = 0;
  Kind kind_ = Kind::Box;
  int fixed_dim_ = 1;
  DimFn dim_fn_;
  BoundFn lower_, upper_;
  std::optional<ConditionalRiskMeasure> rho_;
  std::optional<ConditionalValue> delta_s_;
  bool with_consumption_ = false;
  ScoreFn score_;
  double threshold_offset_ = 0.0;
  std::vector<std::vector<std::vector<double>>> points_;
  PredicateFn predicate_;
};

/// Stability of the feasibility indicator: controls feasible for pasted
/// states along any stage partition stay feasible, exactly.
CheckReport check_control_stability(const ControlSetSpec& spec,
                                    std::span<const ConditionalValue> states,
                                    std::span<const StagePartition> partitions, double h);

/// Per-node dimension map stabilizes along a convergent state sequence.
CheckReport check_dimension_stabilization(const ControlSetSpec& spec,
                                          std::span<const ConditionalValue> x_seq,
                                          const ConditionalValue& x_limit);

}  // namespace treedp

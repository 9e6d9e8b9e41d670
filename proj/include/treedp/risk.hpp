#pragma once

#include <functional>
#include <optional>
#include <span>

#include "treedp/check_report.hpp"
#include "treedp/conditional.hpp"

namespace treedp {

/// One-step conditional convex risk measure mapping stage-(t+1) positions to
/// stage-t capital requirements. Evaluation is nodewise over the children of
/// each stage-t node, so it is stable by construction.
class ConditionalRiskMeasure {
public:
  enum class Kind { Entropic, NegativeExpectation, Custom };

  /// Per-node aggregator: given a stage-t node and the position's values on
  /// its children (with their conditional probabilities), produce rho at the node.
  using Kernel = std::function<double(const ScenarioTree&, int node_id,
                                      std::span<const double> child_values)>;

  static ConditionalRiskMeasure entropic(double gamma);
  /// Entropic with per-node risk aversion, pinned to the given stage.
  static ConditionalRiskMeasure entropic(ConditionalValue per_node_gamma);
  static ConditionalRiskMeasure negative_expectation();
  static ConditionalRiskMeasure custom(Kernel kernel);

  Kind kind() const { return kind_; }

  /// rho at a single stage-t node, given the position on its children.
  double evaluate_at(const ScenarioTree& tree, int node_id,
                     std::span<const double> child_values) const;

  /// Lifted evaluation: x at stage t+1 produces the result at stage t.
  ConditionalValue evaluate(const ConditionalValue& x) const;

  double gamma_at(const ScenarioTree& tree, int node_id) const;

private:
  ConditionalRiskMeasure() = default;

  Kind kind_ = Kind::Entropic;
  double gamma_ = 1.0;
  std::optional<ConditionalValue> per_node_gamma_;
  Kernel kernel_;
};

/// Axiom battery: normalization, monotonicity, translation invariance,
/// conditional convexity, and the large-loss sensitivity scan (doubling the
/// position until rho exceeds 1e6 wherever a downside child exists).
CheckReport check_axioms(const ConditionalRiskMeasure& rho, std::span<const ConditionalValue> battery);

}  // namespace treedp

#include "treedp/risk.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "treedp/errors.hpp"
#include "treedp/extended.hpp"

namespace treedp {

ConditionalRiskMeasure ConditionalRiskMeasure::entropic(double gamma) {
  if (!(gamma > 0.0)) throw ConfigError("entropic risk aversion must be positive");
  ConditionalRiskMeasure m;
  m.kind_ = Kind::Entropic;
  m.gamma_ = gamma;
  return m;
}

ConditionalRiskMeasure ConditionalRiskMeasure::entropic(ConditionalValue per_node_gamma) {
  if (per_node_gamma.payload() != Payload::Scalar)
    throw ConfigError("per-node risk aversion must be a scalar payload");
  for (std::size_t i = 0; i < per_node_gamma.size(); ++i)
    if (!(per_node_gamma.scalar(i) > 0.0))
      throw ConfigError("entropic risk aversion must be positive on every node");
  ConditionalRiskMeasure m;
  m.kind_ = Kind::Entropic;
  m.per_node_gamma_ = std::move(per_node_gamma);
  return m;
}

ConditionalRiskMeasure ConditionalRiskMeasure::negative_expectation() {
  ConditionalRiskMeasure m;
  m.kind_ = Kind::NegativeExpectation;
  return m;
}

ConditionalRiskMeasure ConditionalRiskMeasure::custom(Kernel kernel) {
  ConditionalRiskMeasure m;
  m.kind_ = Kind::Custom;
  m.kernel_ = std::move(kernel);
  return m;
}

double ConditionalRiskMeasure::gamma_at(const ScenarioTree& tree, int node_id) const {
  if (!per_node_gamma_) return gamma_;
  const auto& g = *per_node_gamma_;
  if (tree.node(node_id).stage != g.stage())
    throw ConfigError("per-node risk aversion pinned to stage " + std::to_string(g.stage()) +
                      " evaluated at stage " + std::to_string(tree.node(node_id).stage));
  return g.scalar(tree.ordinal(node_id));
}

double ConditionalRiskMeasure::evaluate_at(const ScenarioTree& tree, int node_id,
                                           std::span<const double> child_values) const {
  const TreeNode& n = tree.node(node_id);
  if (child_values.size() != n.children.size())
    throw ConfigError("risk evaluation: child count mismatch at node " + std::to_string(node_id));
  switch (kind_) {
    case Kind::Entropic: {
      const double gamma = gamma_at(tree, node_id);
      // Max-shifted log-sum-exp; the sensitivity scan pushes exponents to
      // +-large, so the shift is load-bearing, not cosmetic.
      double shift = ext::kNegInf;
      for (double y : child_values) shift = std::max(shift, -gamma * y);
      if (ext::is_pos_inf(shift)) return ext::kPosInf;
      double s = 0.0;
      for (std::size_t j = 0; j < child_values.size(); ++j)
        s += tree.node(n.children[j]).edge_prob * std::exp(-gamma * child_values[j] - shift);
      return (shift + std::log(s)) / gamma;
    }
    case Kind::NegativeExpectation: {
      double s = 0.0;
      for (std::size_t j = 0; j < child_values.size(); ++j)
        s += tree.node(n.children[j]).edge_prob * child_values[j];
      return -s;
    }
    case Kind::Custom:
      return kernel_(tree, node_id, child_values);
  }
  throw Error("unreachable");
}

ConditionalValue ConditionalRiskMeasure::evaluate(const ConditionalValue& x) const {
  if (x.payload() != Payload::Scalar) throw ConfigError("risk measures act on scalar payloads");
  if (x.stage() < 1) throw ConfigError("risk measures need a stage >= 1 position");
  const ScenarioTree& tree = x.tree();
  const int t = x.stage() - 1;
  auto parents = tree.atoms(t);
  ConditionalValue::ScalarData out(parents.size());
  std::vector<double> child_values;
  for (std::size_t i = 0; i < parents.size(); ++i) {
    const TreeNode& n = tree.node(parents[i]);
    child_values.clear();
    for (int c : n.children) child_values.push_back(x.scalar(tree.ordinal(c)));
    out[i] = evaluate_at(tree, n.id, child_values);
  }
  return ConditionalValue::scalars(x.tree_ptr(), t, std::move(out));
}

namespace {

constexpr double kAxiomTol = 1e-10;
constexpr double kSensitivityThreshold = 1e6;
constexpr int kMaxDoublings = 60;

std::string node_witness(std::size_t ordinal, double lhs, double rhs) {
  return "node ordinal " + std::to_string(ordinal) + ": " + std::to_string(lhs) + " vs " +
         std::to_string(rhs);
}

}  // namespace

CheckReport check_axioms(const ConditionalRiskMeasure& rho,
                         std::span<const ConditionalValue> battery) {
  CheckReport report;
  if (battery.empty()) {
    report.add("axioms", false, "empty battery");
    return report;
  }
  const TreePtr tree = battery[0].tree_ptr();
  const int stage = battery[0].stage();

  // Normalization: rho(0) = 0, exactly.
  {
    auto zero = ConditionalValue::constant(tree, stage, 0.0);
    auto r = rho.evaluate(zero);
    bool ok = true;
    std::string witness;
    for (std::size_t i = 0; i < r.size(); ++i)
      if (r.scalar(i) != 0.0) {
        ok = false;
        witness = node_witness(i, r.scalar(i), 0.0);
        break;
      }
    report.add("normalization", ok, witness);
  }

  // Monotonicity: x >= y nodewise implies rho(x) <= rho(y).
  {
    bool ok = true;
    std::string witness;
    for (std::size_t k = 0; k + 1 < battery.size() && ok; k += 2) {
      const auto& x = battery[k];
      auto y = x;
      {
        ConditionalValue::ScalarData lowered = x.scalar_data();
        const auto& bump = battery[k + 1];
        for (std::size_t i = 0; i < lowered.size(); ++i)
          lowered[i] -= std::abs(bump.scalar(i));
        y = ConditionalValue::scalars(tree, stage, std::move(lowered));
      }
      auto rx = rho.evaluate(x), ry = rho.evaluate(y);
      for (std::size_t i = 0; i < rx.size(); ++i)
        if (rx.scalar(i) > ry.scalar(i) + kAxiomTol) {
          ok = false;
          witness = "trial " + std::to_string(k) + ", " + node_witness(i, rx.scalar(i), ry.scalar(i));
          break;
        }
    }
    report.add("monotonicity", ok, witness);
  }

  // Translation invariance: rho(x + m) = rho(x) - m for stage-t measurable m.
  {
    bool ok = true;
    std::string witness;
    for (std::size_t k = 0; k + 1 < battery.size() && ok; k += 2) {
      const auto& x = battery[k];
      const auto& seed = battery[k + 1];
      const ScenarioTree& tr = *tree;
      const int t = stage - 1;
      // m is measurable at stage t: child values inherit the parent entry.
      ConditionalValue::ScalarData shifted = x.scalar_data();
      ConditionalValue::ScalarData m_parent(tr.stage_size(t));
      for (std::size_t i = 0; i < m_parent.size(); ++i)
        m_parent[i] = seed.scalar(tr.ordinal(tr.node(tr.atoms(t)[i]).children.front()));
      for (std::size_t j = 0; j < shifted.size(); ++j) {
        const int id = tr.atoms(stage)[j];
        shifted[j] += m_parent[tr.ordinal(tr.ancestor(id, t))];
      }
      auto rx = rho.evaluate(x);
      auto rs = rho.evaluate(ConditionalValue::scalars(tree, stage, std::move(shifted)));
      for (std::size_t i = 0; i < rx.size(); ++i)
        if (std::abs(rs.scalar(i) - (rx.scalar(i) - m_parent[i])) > kAxiomTol) {
          ok = false;
          witness = "trial " + std::to_string(k) + ", " +
                    node_witness(i, rs.scalar(i), rx.scalar(i) - m_parent[i]);
          break;
        }
    }
    report.add("translation invariance", ok, witness);
  }

  // Conditional convexity with a stage-t measurable lambda in [0,1].
  {
    bool ok = true;
    std::string witness;
    for (std::size_t k = 0; k + 2 < battery.size() && ok; k += 3) {
      const auto& x = battery[k];
      const auto& y = battery[k + 1];
      const auto& seed = battery[k + 2];
      const ScenarioTree& tr = *tree;
      const int t = stage - 1;
      ConditionalValue::ScalarData lam_parent(tr.stage_size(t));
      for (std::size_t i = 0; i < lam_parent.size(); ++i) {
        const double raw = seed.scalar(tr.ordinal(tr.node(tr.atoms(t)[i]).children.front()));
        lam_parent[i] = std::fmod(std::abs(raw), 1.0);
      }
      ConditionalValue::ScalarData mix(x.size());
      for (std::size_t j = 0; j < mix.size(); ++j) {
        const int id = tr.atoms(stage)[j];
        const double lam = lam_parent[tr.ordinal(tr.ancestor(id, t))];
        mix[j] = lam * x.scalar(j) + (1.0 - lam) * y.scalar(j);
      }
      auto rmix = rho.evaluate(ConditionalValue::scalars(tree, stage, std::move(mix)));
      auto rx = rho.evaluate(x);
      auto ry = rho.evaluate(y);
      for (std::size_t i = 0; i < rmix.size(); ++i) {
        const double bound = lam_parent[i] * rx.scalar(i) + (1.0 - lam_parent[i]) * ry.scalar(i);
        if (rmix.scalar(i) > bound + kAxiomTol) {
          ok = false;
          witness = "trial " + std::to_string(k) + ", " + node_witness(i, rmix.scalar(i), bound);
          break;
        }
      }
    }
    report.add("conditional convexity", ok, witness);
  }

  // Sensitivity to large losses: rho(2^j y) must exceed the threshold on
  // every stage-t node that sees a strictly negative child of y.
  {
    bool ok = true;
    std::string witness;
    const ScenarioTree& tr = *tree;
    const int t = stage - 1;
    for (std::size_t k = 0; k < battery.size() && ok; ++k) {
      const auto& y = battery[k];
      auto parents = tr.atoms(t);
      for (std::size_t i = 0; i < parents.size() && ok; ++i) {
        bool downside = false;
        for (int c : tr.node(parents[i]).children)
          if (y.scalar(tr.ordinal(c)) < -1e-6) downside = true;
        if (!downside) continue;
        bool exceeded = false;
        for (int j = 0; j <= kMaxDoublings && !exceeded; ++j) {
          const double m = std::ldexp(1.0, j);
          auto scaled = y.map_scalars([m](double v) { return m * v; });
          if (rho.evaluate(scaled).scalar(i) >= kSensitivityThreshold) exceeded = true;
        }
        if (!exceeded) {
          ok = false;
          witness = "trial " + std::to_string(k) + ", node ordinal " + std::to_string(i) +
                    " never exceeded " + std::to_string(kSensitivityThreshold);
        }
      }
    }
    report.add("sensitivity to large losses", ok, witness);
  }

  return report;
}

}  // namespace treedp

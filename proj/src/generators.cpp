#include "treedp/generators.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "maximize.hpp"
#include "treedp/battery.hpp"
#include "treedp/errors.hpp"
#include "treedp/extended.hpp"

namespace treedp {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_shock(const TreeNode& child) {
  if (child.shock.empty())
    throw ConfigError("node " + std::to_string(child.id) + " carries no shock data");
}

/// -log sum_j p_j exp(-w_j), max-shift stabilized; -inf entries dominate.
double neg_log_mean_exp(const ScenarioTree& tree, const TreeNode& n, std::span<const double> w) {
  double shift = ext::kNegInf;
  for (double v : w) {
    if (ext::is_neg_inf(v)) return ext::kNegInf;
    if (ext::is_pos_inf(v)) throw ConfigError("continuation value +inf is outside the codomain");
    shift = std::max(shift, -v);
  }
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j)
    s += tree.node(n.children[j]).edge_prob * std::exp(-w[j] - shift);
  return -(shift + std::log(s));
}

}  // namespace

ForwardGenerator ForwardGenerator::wealth_consumption() {
  ForwardGenerator g;
  g.kind_ = Kind::WealthConsumption;
  return g;
}

ForwardGenerator ForwardGenerator::self_financing() {
  ForwardGenerator g;
  g.kind_ = Kind::SelfFinancing;
  return g;
}

ForwardGenerator ForwardGenerator::portfolio_identity() {
  ForwardGenerator g;
  g.kind_ = Kind::PortfolioIdentity;
  return g;
}

ForwardGenerator ForwardGenerator::custom(StepFn fn) {
  ForwardGenerator g;
  g.kind_ = Kind::Custom;
  g.fn_ = std::move(fn);
  return g;
}

double ForwardGenerator::step(const ScenarioTree& tree, int child_id, double x,
                              std::span<const double> z) const {
  const TreeNode& child = tree.node(child_id);
  switch (kind_) {
    case Kind::WealthConsumption: {
      check_shock(child);
      const std::size_t d = child.shock.size();
      if (z.size() != d + 1)
        throw ConfigError("wealth-consumption control needs " + std::to_string(d + 1) +
                          " coordinates");
      return x + dot(z.subspan(0, d), child.shock) - z[d];
    }
    case Kind::SelfFinancing: {
      check_shock(child);
      if (z.size() != child.shock.size())
        throw ConfigError("self-financing control needs " + std::to_string(child.shock.size()) +
                          " coordinates");
      return x + dot(z, child.shock);
    }
    case Kind::PortfolioIdentity:
      if (z.size() != 1) throw ConfigError("portfolio-identity control must be scalar");
      return z[0];
    case Kind::Custom:
      return fn_(tree, child_id, x, z);
  }
  throw Error("unreachable");
}

ConditionalValue ForwardGenerator::evaluate(const ConditionalValue& x,
                                            const ConditionalValue& z) const {
  if (x.stage() != z.stage()) throw ConfigError("forward generator: state/control stage mismatch");
  const ScenarioTree& tree = x.tree();
  const int next = x.stage() + 1;
  auto children = tree.atoms(next);
  ConditionalValue::ScalarData out(children.size());
  for (std::size_t j = 0; j < children.size(); ++j) {
    const int parent = tree.node(children[j]).parent;
    const std::size_t pi = tree.ordinal(parent);
    out[j] = step(tree, children[j], x.scalar(pi), z.vec(pi));
  }
  return ConditionalValue::scalars(x.tree_ptr(), next, std::move(out));
}

int ForwardGenerator::control_dim(const ScenarioTree& tree, int stage) const {
  const int probe = tree.atoms(stage + 1).front();
  const auto shock_dim = static_cast<int>(tree.node(probe).shock.size());
  switch (kind_) {
    case Kind::WealthConsumption: return shock_dim + 1;
    case Kind::SelfFinancing: return shock_dim;
    case Kind::PortfolioIdentity: return 1;
    case Kind::Custom: return shock_dim > 0 ? shock_dim : 1;
  }
  throw Error("unreachable");
}

BackwardGenerator BackwardGenerator::entropic_wealth(double gamma_min, double gamma_max) {
  // An inverted range produces an increasing profile; it is accepted here so
  // the condition battery can flag the resulting monotonicity failure.
  if (!(gamma_min > 0.0) || !(gamma_max > 0.0))
    throw ConfigError("entropic risk aversion must be positive");
  BackwardGenerator g;
  g.kind_ = Kind::EntropicWealth;
  g.gamma_min_ = gamma_min;
  g.gamma_max_ = gamma_max;
  return g;
}

BackwardGenerator BackwardGenerator::scaling_entropic() {
  BackwardGenerator g;
  g.kind_ = Kind::ScalingFamily;
  return g;
}

BackwardGenerator BackwardGenerator::additive(RewardFn reward) {
  BackwardGenerator g;
  g.kind_ = Kind::Additive;
  g.reward_ = std::move(reward);
  return g;
}

BackwardGenerator BackwardGenerator::custom(AggregateFn fn) {
  BackwardGenerator g;
  g.kind_ = Kind::Custom;
  g.fn_ = std::move(fn);
  return g;
}

double BackwardGenerator::gamma_at(double x) const {
  return gamma_min_ + (gamma_max_ - gamma_min_) / (1.0 + std::max(x, 0.0));
}

double BackwardGenerator::aggregate(const ScenarioTree& tree, int node_id, double x,
                                    std::span<const double> child_y,
                                    std::span<const double> z) const {
  const TreeNode& n = tree.node(node_id);
  if (child_y.size() != n.children.size())
    throw ConfigError("aggregate: continuation size mismatch at node " + std::to_string(node_id));
  switch (kind_) {
    case Kind::EntropicWealth: {
      const double gamma = gamma_at(x);
      std::vector<double> w(child_y.size());
      for (std::size_t j = 0; j < w.size(); ++j)
        w[j] = ext::is_neg_inf(child_y[j]) ? ext::kNegInf : gamma * child_y[j];
      const double g = neg_log_mean_exp(tree, n, w);
      return ext::is_neg_inf(g) ? ext::kNegInf : g / gamma;
    }
    case Kind::ScalingFamily: {
      if (!(x > 0.0))
        throw ConfigError("scaling-family aggregator needs x > 0 at node " + std::to_string(node_id));
      std::vector<double> w(child_y.size());
      for (std::size_t j = 0; j < w.size(); ++j)
        w[j] = ext::is_neg_inf(child_y[j]) ? ext::kNegInf : child_y[j] / x;
      const double g = neg_log_mean_exp(tree, n, w);
      return ext::is_neg_inf(g) ? ext::kNegInf : x * g;
    }
    case Kind::Additive: {
      double s = 0.0;
      for (std::size_t j = 0; j < child_y.size(); ++j) {
        if (ext::is_pos_inf(child_y[j]))
          throw ConfigError("continuation value +inf is outside the codomain");
        if (ext::is_neg_inf(child_y[j])) return ext::kNegInf;
        s += tree.node(n.children[j]).edge_prob * child_y[j];
      }
      return s + reward_(tree, node_id, x, z);
    }
    case Kind::Custom:
      return fn_(tree, node_id, x, child_y, z);
  }
  throw Error("unreachable");
}

ConditionalValue BackwardGenerator::evaluate(const ConditionalValue& x, const ConditionalValue& y,
                                             const ConditionalValue* z) const {
  if (y.stage() != x.stage() + 1)
    throw ConfigError("backward generator: continuation must live one stage later");
  const ScenarioTree& tree = x.tree();
  auto parents = tree.atoms(x.stage());
  ConditionalValue::ScalarData out(parents.size());
  std::vector<double> child_y;
  const std::vector<double> no_control;
  for (std::size_t i = 0; i < parents.size(); ++i) {
    const TreeNode& n = tree.node(parents[i]);
    child_y.clear();
    for (int c : n.children) child_y.push_back(y.scalar(tree.ordinal(c)));
    out[i] = aggregate(tree, n.id, x.scalar(i), child_y,
                       z ? z->vec(i) : std::span<const double>(no_control));
  }
  return ConditionalValue::scalars(x.tree_ptr(), x.stage(), std::move(out));
}

TerminalGenerator TerminalGenerator::identity() { return TerminalGenerator{}; }

TerminalGenerator TerminalGenerator::custom(ValueFn fn) {
  TerminalGenerator g;
  g.fn_ = std::move(fn);
  return g;
}

void Problem::validate() const {
  if (!tree) throw ConfigError("problem needs a tree");
  const auto T = static_cast<std::size_t>(tree->horizon());
  if (backward.size() != T)
    throw ConfigError("problem needs one backward generator per stage (got " +
                      std::to_string(backward.size()) + ", horizon " + std::to_string(T) + ")");
  if (controls.size() != T)
    throw ConfigError("problem needs one control set per stage (got " +
                      std::to_string(controls.size()) + ", horizon " + std::to_string(T) + ")");
  for (std::size_t t = 0; t < T; ++t)
    if (controls[t].stage() != static_cast<int>(t))
      throw ConfigError("control set at index " + std::to_string(t) + " is pinned to stage " +
                        std::to_string(controls[t].stage()));
}

namespace {

struct ConditionBattery {
  std::vector<ConditionalValue> states;        // stage t scalars
  std::vector<ConditionalValue> controls;      // stage t vectors (per-node dims)
  std::vector<ConditionalValue> continuations; // stage t+1 scalars
  std::vector<StagePartition> partitions;      // stage t
};

ConditionBattery make_battery(const Problem& problem, int t, std::size_t trials, Rng& rng) {
  ConditionBattery b;
  const TreePtr& tree = problem.tree;
  b.states = random_scalar_battery(tree, t, trials, rng, 0.25, 3.0);
  b.continuations = random_scalar_battery(tree, t + 1, trials, rng, -2.0, 2.0);
  b.partitions = random_partitions(*tree, t, std::max<std::size_t>(trials / 2, 4), rng);
  std::uniform_real_distribution<double> mag(0.1, 2.0);
  for (std::size_t k = 0; k < trials; ++k) {
    ConditionalValue::VectorData zs(tree->stage_size(t));
    for (std::size_t i = 0; i < zs.size(); ++i) {
      const int d = problem.controls[static_cast<std::size_t>(t)].dim(i, b.states[k].scalar(i));
      zs[i].resize(static_cast<std::size_t>(d));
      for (double& v : zs[i]) v = (rng() % 2 == 0 ? 1.0 : -1.0) * mag(rng);
    }
    b.controls.push_back(ConditionalValue::vectors(tree, t, std::move(zs)));
  }
  return b;
}

ConditionalValue stagewise_shift(const ConditionalValue& y, const ConditionalValue& shift_parent) {
  // Lift a stage-t measurable shift to the children's stage and add it.
  const ScenarioTree& tree = y.tree();
  ConditionalValue::ScalarData out = y.scalar_data();
  for (std::size_t j = 0; j < out.size(); ++j) {
    const int id = tree.atoms(y.stage())[j];
    out[j] += shift_parent.scalar(tree.ordinal(tree.ancestor(id, shift_parent.stage())));
  }
  return ConditionalValue::scalars(y.tree_ptr(), y.stage(), std::move(out));
}

}  // namespace

CheckReport check_generator_conditions(const Problem& problem, const GeneratorCheckConfig& config) {
  problem.validate();
  CheckReport report;
  Rng rng(config.seed);
  const TreePtr& tree = problem.tree;
  const int T = problem.horizon();

  for (int t = 0; t < T; ++t) {
    const auto st = static_cast<std::size_t>(t);
    const auto& fwd = problem.forward;
    const auto& bwd = problem.backward[st];
    ConditionBattery b = make_battery(problem, t, config.trials, rng);
    const std::string at = " [stage " + std::to_string(t) + "]";

    // v1: pasting commutes with the forward step, exactly.
    {
      bool ok = true;
      std::string witness;
      for (std::size_t p = 0; p < b.partitions.size() && ok; ++p) {
        const auto& part = b.partitions[p];
        std::vector<ConditionalValue> xs, zs, outs;
        for (std::size_t k = 0; k < part.block_count(); ++k) {
          xs.push_back(b.states[(p + k) % b.states.size()]);
          zs.push_back(b.controls[(p + k) % b.controls.size()]);
          outs.push_back(fwd.evaluate(xs.back(), zs.back()));
        }
        auto lhs = fwd.evaluate(concatenate(xs, part), concatenate(zs, part));
        auto rhs = concatenate(outs, part);
        if (!lhs.equals(rhs, 0.0)) {
          ok = false;
          witness = "partition " + std::to_string(p);
        }
      }
      report.add("v1 forward stability" + at, ok, witness);
    }

    // v2: difference quotients stay bounded as the perturbation shrinks.
    {
      bool ok = true;
      std::string witness;
      for (std::size_t k = 0; k < b.states.size() && ok; ++k) {
        double prev_ratio = 0.0;
        for (int level = 0; level < 3 && ok; ++level) {
          const double delta = std::pow(10.0, -3 - level);
          double worst = 0.0;
          const auto& x = b.states[k];
          const auto& z = b.controls[k];
          auto x2 = x.map_scalars([delta](double v) { return v + delta; });
          auto base = fwd.evaluate(x, z);
          auto moved = fwd.evaluate(x2, z);
          for (std::size_t j = 0; j < base.size(); ++j)
            worst = std::max(worst, std::abs(moved.scalar(j) - base.scalar(j)) / delta);
          if (level == 2 && worst > 1e4 && worst > 50.0 * prev_ratio) {
            ok = false;
            witness = "trial " + std::to_string(k) + ": difference quotient " + std::to_string(worst);
          }
          prev_ratio = worst;
        }
      }
      report.add("v2 forward continuity" + at, ok, witness);
    }

    // u1: pasting commutes with the aggregator, exactly.
    {
      bool ok = true;
      std::string witness;
      for (std::size_t p = 0; p < b.partitions.size() && ok; ++p) {
        const auto& part = b.partitions[p];
        std::vector<ConditionalValue> xs, ys, zs, outs;
        for (std::size_t k = 0; k < part.block_count(); ++k) {
          xs.push_back(b.states[(p + k) % b.states.size()]);
          ys.push_back(b.continuations[(p + k) % b.continuations.size()]);
          zs.push_back(b.controls[(p + k) % b.controls.size()]);
          outs.push_back(bwd.evaluate(xs.back(), ys.back(), &zs.back()));
        }
        auto z_paste = concatenate(zs, part);
        auto lhs = bwd.evaluate(concatenate(xs, part), concatenate(ys, part), &z_paste);
        auto rhs = concatenate(outs, part);
        if (!lhs.equals(rhs, 0.0)) {
          ok = false;
          witness = "partition " + std::to_string(p);
        }
      }
      report.add("u1 aggregator stability" + at, ok, witness);
    }

    // u2: increasing in the continuation argument.
    {
      bool ok = true;
      std::string witness;
      for (std::size_t k = 0; k + 1 < b.continuations.size() && ok; ++k) {
        const auto& x = b.states[k];
        const auto& z = b.controls[k];
        const auto& y = b.continuations[k];
        auto y_hi = y;
        {
          ConditionalValue::ScalarData raised = y.scalar_data();
          for (std::size_t j = 0; j < raised.size(); ++j)
            raised[j] += std::abs(b.continuations[k + 1].scalar(j));
          y_hi = ConditionalValue::scalars(tree, t + 1, std::move(raised));
        }
        auto lo = bwd.evaluate(x, y, &z), hi = bwd.evaluate(x, y_hi, &z);
        for (std::size_t i = 0; i < lo.size(); ++i)
          if (hi.scalar(i) < lo.scalar(i) - 1e-12) {
            ok = false;
            witness = "trial " + std::to_string(k) + ", node ordinal " + std::to_string(i);
            break;
          }
      }
      report.add("u2 continuation monotonicity" + at, ok, witness);
    }

    // u3: along decreasing sequences the limit value is not exceeded.
    {
      bool ok = true;
      std::string witness;
      for (std::size_t k = 0; k < b.states.size() && ok; ++k) {
        const auto& x = b.states[k];
        const auto& y = b.continuations[k];
        const auto& z = b.controls[k];
        auto limit = bwd.evaluate(x, y, &z);
        const double eps = std::ldexp(1.0, -20);
        auto xj = x.map_scalars([eps](double v) { return v + eps; });
        auto yj = y.map_scalars([eps](double v) { return v + eps; });
        auto vj = bwd.evaluate(xj, yj, &z);
        for (std::size_t i = 0; i < limit.size(); ++i)
          if (vj.scalar(i) > limit.scalar(i) + 1e-8 + 2.0 * eps) {
            ok = false;
            witness = "trial " + std::to_string(k) + ", node ordinal " + std::to_string(i);
            break;
          }
      }
      report.add("u3 upper semi-continuity (surrogate)" + at, ok, witness);
    }

    if (!config.monotone_regime) continue;

    // v3: increasing in the state.
    {
      bool ok = true;
      std::string witness;
      for (std::size_t k = 0; k + 1 < b.states.size() && ok; ++k) {
        const auto& x = b.states[k];
        auto x_hi = x.map_scalars([&](double v) { return v + 0.5; });
        auto lo = fwd.evaluate(x, b.controls[k]);
        auto hi = fwd.evaluate(x_hi, b.controls[k]);
        for (std::size_t j = 0; j < lo.size(); ++j)
          if (hi.scalar(j) < lo.scalar(j) - 1e-12) {
            ok = false;
            witness = "trial " + std::to_string(k);
            break;
          }
      }
      report.add("v3 state monotonicity" + at, ok, witness);
    }

    // v4: concavity in the control (equality for affine dynamics).
    {
      bool ok = true;
      std::string witness;
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (std::size_t k = 0; k + 1 < b.controls.size() && ok; ++k) {
        const double lam = unit(rng);
        const auto& x = b.states[k];
        const auto& z1 = b.controls[k];
        const auto& z2 = b.controls[k + 1];
        ConditionalValue::VectorData mixed(z1.size());
        for (std::size_t i = 0; i < z1.size(); ++i) {
          auto a = z1.vec(i), c = z2.vec(i);
          mixed[i].resize(a.size());
          for (std::size_t q = 0; q < a.size(); ++q) mixed[i][q] = lam * a[q] + (1 - lam) * c[q];
        }
        auto vm = fwd.evaluate(x, ConditionalValue::vectors(tree, t, std::move(mixed)));
        auto v1 = fwd.evaluate(x, z1);
        auto v2 = fwd.evaluate(x, z2);
        for (std::size_t j = 0; j < vm.size(); ++j)
          if (vm.scalar(j) < lam * v1.scalar(j) + (1 - lam) * v2.scalar(j) - 1e-10) {
            ok = false;
            witness = "trial " + std::to_string(k);
            break;
          }
      }
      report.add("v4 control concavity" + at, ok, witness);
    }

    // v5: any nonzero control sees a strictly smaller state on some child.
    {
      bool ok = true;
      std::string witness;
      for (std::size_t k = 0; k < b.controls.size() && ok; ++k) {
        const auto& x = b.states[k];
        const auto& z = b.controls[k];
        auto next = fwd.evaluate(x, z);
        for (std::size_t i = 0; i < x.size() && ok; ++i) {
          double zmax = 0.0;
          for (double v : z.vec(i)) zmax = std::max(zmax, std::abs(v));
          if (zmax < 1e-9) continue;
          const TreeNode& n = tree->node(tree->atoms(t)[i]);
          bool down = false;
          for (int c : n.children)
            if (next.scalar(tree->ordinal(c)) < x.scalar(i)) down = true;
          if (!down) {
            ok = false;
            witness = "trial " + std::to_string(k) + ", node ordinal " + std::to_string(i) +
                      ": no downside child";
          }
        }
      }
      report.add("v5 control downside" + at, ok, witness);
    }

    // v6: the zero control leaves the state unchanged.
    {
      bool ok = true;
      std::string witness;
      for (std::size_t k = 0; k < b.states.size() && ok; ++k) {
        const auto& x = b.states[k];
        ConditionalValue::VectorData zeros(x.size());
        for (std::size_t i = 0; i < x.size(); ++i)
          zeros[i].assign(b.controls[k].vec(i).size(), 0.0);
        auto next = fwd.evaluate(x, ConditionalValue::vectors(tree, t, std::move(zeros)));
        for (std::size_t j = 0; j < next.size(); ++j) {
          const int id = tree->atoms(t + 1)[j];
          const double xv = x.scalar(tree->ordinal(tree->node(id).parent));
          if (std::abs(next.scalar(j) - xv) > 1e-12) {
            ok = false;
            witness = "trial " + std::to_string(k);
            break;
          }
        }
      }
      report.add("v6 zero-control identity" + at, ok, witness);
    }

    // u2': increasing in the state and in the continuation separately.
    {
      bool ok = true;
      std::string witness;
      for (std::size_t k = 0; k < b.states.size() && ok; ++k) {
        const auto& x = b.states[k];
        const auto& y = b.continuations[k];
        const auto& z = b.controls[k];
        auto lo = bwd.evaluate(x, y, &z);
        auto x_hi = x.map_scalars([](double v) { return v + 0.7; });
        auto hi_x = bwd.evaluate(x_hi, y, &z);
        auto y_hi = y.map_scalars([](double v) { return v + 0.3; });
        auto hi_y = bwd.evaluate(x, y_hi, &z);
        for (std::size_t i = 0; i < lo.size(); ++i)
          if (hi_x.scalar(i) < lo.scalar(i) - 1e-10 || hi_y.scalar(i) < lo.scalar(i) - 1e-10) {
            ok = false;
            witness = "trial " + std::to_string(k) + ", node ordinal " + std::to_string(i);
            break;
          }
      }
      report.add("u2' joint monotonicity" + at, ok, witness);
    }

    // u4: quasi-concavity in (continuation, control).
    {
      bool ok = true;
      std::string witness;
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (std::size_t k = 0; k + 1 < b.continuations.size() && ok; ++k) {
        const double lam = unit(rng);
        const auto& x = b.states[k];
        const auto& y1 = b.continuations[k];
        const auto& y2 = b.continuations[k + 1];
        const auto& z1 = b.controls[k];
        const auto& z2 = b.controls[k + 1];
        ConditionalValue::ScalarData ym(y1.size());
        for (std::size_t j = 0; j < ym.size(); ++j)
          ym[j] = lam * y1.scalar(j) + (1 - lam) * y2.scalar(j);
        ConditionalValue::VectorData zm(z1.size());
        for (std::size_t i = 0; i < z1.size(); ++i) {
          auto a = z1.vec(i), c = z2.vec(i);
          zm[i].resize(a.size());
          for (std::size_t q = 0; q < a.size(); ++q) zm[i][q] = lam * a[q] + (1 - lam) * c[q];
        }
        auto ymix = ConditionalValue::scalars(tree, t + 1, std::move(ym));
        auto zmix = ConditionalValue::vectors(tree, t, std::move(zm));
        auto um = bwd.evaluate(x, ymix, &zmix);
        auto u1v = bwd.evaluate(x, y1, &z1);
        auto u2v = bwd.evaluate(x, y2, &z2);
        for (std::size_t i = 0; i < um.size(); ++i)
          if (um.scalar(i) < std::min(u1v.scalar(i), u2v.scalar(i)) - 1e-10) {
            ok = false;
            witness = "trial " + std::to_string(k) + ", node ordinal " + std::to_string(i);
            break;
          }
      }
      report.add("u4 quasi-concavity" + at, ok, witness);
    }

    // u5: stage-t measurable shifts pass through additively.
    {
      bool ok = true;
      std::string witness;
      for (std::size_t k = 0; k + 1 < b.states.size() && ok; ++k) {
        const auto& x = b.states[k];
        const auto& y = b.continuations[k];
        const auto& z = b.controls[k];
        const auto& c = b.states[k + 1];  // reused as the measurable shift
        auto shifted = stagewise_shift(y, c);
        auto lhs = bwd.evaluate(x, shifted, &z);
        auto rhs = bwd.evaluate(x, y, &z);
        for (std::size_t i = 0; i < lhs.size(); ++i)
          if (std::abs(lhs.scalar(i) - (rhs.scalar(i) + c.scalar(i))) > 1e-10) {
            ok = false;
            witness = "trial " + std::to_string(k) + ", node ordinal " + std::to_string(i);
            break;
          }
      }
      report.add("u5 translation invariance" + at, ok, witness);
    }

    // u6: doubling a downside position drives the value to -inf.
    {
      bool ok = true;
      std::string witness;
      for (std::size_t k = 0; k < b.continuations.size() && ok; ++k) {
        const auto& x = b.states[k];
        const auto& y = b.continuations[k];
        const auto& z = b.controls[k];
        for (std::size_t i = 0; i < x.size() && ok; ++i) {
          const TreeNode& n = tree->node(tree->atoms(t)[i]);
          bool downside = false;
          for (int cid : n.children)
            if (y.scalar(tree->ordinal(cid)) < -1e-6) downside = true;
          if (!downside) continue;
          bool diverged = false;
          for (int j = 0; j <= 60 && !diverged; ++j) {
            const double m = std::ldexp(1.0, j);
            auto ym = y.map_scalars([m](double v) { return m * v; });
            ConditionalValue::VectorData zs(x.size());
            for (std::size_t q = 0; q < x.size(); ++q) {
              auto base = z.vec(q);
              zs[q].resize(base.size());
              for (std::size_t r = 0; r < base.size(); ++r) zs[q][r] = m * base[r];
            }
            auto zm = ConditionalValue::vectors(tree, t, std::move(zs));
            if (bwd.evaluate(x, ym, &zm).scalar(i) <= -1e6) diverged = true;
          }
          if (!diverged) {
            ok = false;
            witness = "trial " + std::to_string(k) + ", node ordinal " + std::to_string(i);
          }
        }
      }
      report.add("u6 loss sensitivity" + at, ok, witness);
    }

    // u7: u(x, 0, 0) = 0.
    {
      bool ok = true;
      std::string witness;
      for (std::size_t k = 0; k < b.states.size() && ok; ++k) {
        const auto& x = b.states[k];
        auto zero_y = ConditionalValue::constant(tree, t + 1, 0.0);
        ConditionalValue::VectorData zeros(x.size());
        for (std::size_t i = 0; i < x.size(); ++i)
          zeros[i].assign(b.controls[k].vec(i).size(), 0.0);
        auto zero_z = ConditionalValue::vectors(tree, t, std::move(zeros));
        auto v = bwd.evaluate(x, zero_y, &zero_z);
        for (std::size_t i = 0; i < v.size(); ++i)
          if (std::abs(v.scalar(i)) > 1e-12) {
            ok = false;
            witness = "trial " + std::to_string(k) + ", node ordinal " + std::to_string(i) + ": " +
                      std::to_string(v.scalar(i));
            break;
          }
      }
      report.add("u7 zero at the origin" + at, ok, witness);
    }
  }
  return report;
}

KEstimate estimate_K(const TreePtr& tree, const ForwardGenerator& forward,
                     const std::vector<BackwardGenerator>& backward,
                     std::span<const double> x_battery) {
  if (x_battery.empty()) throw ConfigError("estimate_K needs a state battery");
  const int T = tree->horizon();
  if (static_cast<int>(backward.size()) != T)
    throw ConfigError("estimate_K: one backward generator per stage required");
  KEstimate est;
  est.per_stage.assign(static_cast<std::size_t>(T), 0.0);
  for (int t = 0; t < T; ++t) {
    const int d = forward.control_dim(*tree, t);
    double k_t = 0.0;
    for (int id : tree->atoms(t)) {
      const TreeNode& n = tree->node(id);
      for (double x : x_battery) {
        auto one_step = [&](std::span<const double> z) {
          std::vector<double> next(n.children.size());
          for (std::size_t j = 0; j < next.size(); ++j)
            next[j] = forward.step(*tree, n.children[j], x, z);
          return backward[static_cast<std::size_t>(t)].aggregate(*tree, id, x, next, z) - x;
        };
        try {
          auto res = detail::pattern_search_max(one_step,
                                                std::vector<double>(static_cast<std::size_t>(d), 0.0),
                                                1.0, 1e-9, {}, 1e6);
          k_t = std::max(k_t, res.value);
        } catch (const DivergenceError&) {
          throw DivergenceError("no finite one-step bound: the advantage diverges at stage " +
                                std::to_string(t) + ", node " + std::to_string(id) + ", state " +
                                std::to_string(x));
        }
      }
    }
    est.per_stage[static_cast<std::size_t>(t)] = k_t;
    est.overall = std::max(est.overall, k_t);
  }
  return est;
}

std::vector<ControlSetSpec> induced_control_sets(const TreePtr& tree,
                                                 const ForwardGenerator& forward,
                                                 const std::vector<BackwardGenerator>& backward,
                                                 double k_bound) {
  const int T = tree->horizon();
  if (static_cast<int>(backward.size()) != T)
    throw ConfigError("induced control sets: one backward generator per stage required");
  std::vector<ControlSetSpec> out;
  out.reserve(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const int d = forward.control_dim(*tree, t);
    const BackwardGenerator& bwd = backward[static_cast<std::size_t>(t)];
    const ForwardGenerator fwd = forward;
    const TreePtr tp = tree;
    auto score = [tp, fwd, bwd](int node_id, double x, std::span<const double> z) {
      const TreeNode& n = tp->node(node_id);
      std::vector<double> next(n.children.size());
      for (std::size_t j = 0; j < next.size(); ++j)
        next[j] = fwd.step(*tp, n.children[j], x, z);
      return bwd.aggregate(*tp, node_id, x, next, z);
    };
    const double offset = static_cast<double>(T - t - 1) * k_bound;
    out.push_back(ControlSetSpec::upper_level(tree, t, d, score, offset));
  }
  return out;
}

}  // namespace treedp

#include "treedp/risk_sharing.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "treedp/battery.hpp"
#include "treedp/errors.hpp"
#include "treedp/extended.hpp"

namespace treedp {

SharingKernel SharingKernel::entropic() {
  SharingKernel k;
  k.fn_ = [](const ScenarioTree& tree, int node_id, std::span<const double> child_y) {
    const TreeNode& n = tree.node(node_id);
    double shift = ext::kNegInf;
    for (double y : child_y) {
      if (ext::is_neg_inf(y)) return ext::kNegInf;
      shift = std::max(shift, -y);
    }
    double s = 0.0;
    for (std::size_t j = 0; j < child_y.size(); ++j)
      s += tree.node(n.children[j]).edge_prob * std::exp(-child_y[j] - shift);
    return -(shift + std::log(s));
  };
  return k;
}

SharingKernel SharingKernel::custom(Fn fn) {
  SharingKernel k;
  k.fn_ = std::move(fn);
  return k;
}

double SharingKernel::at(const ScenarioTree& tree, int node_id,
                         std::span<const double> child_y) const {
  return fn_(tree, node_id, child_y);
}

CheckReport check_kernel(const SharingKernel& kernel, const TreePtr& tree, std::size_t trials,
                         std::uint64_t seed) {
  CheckReport report;
  Rng rng(seed);
  const int t = 0;
  auto battery = random_scalar_battery(tree, t + 1, 2 * trials + 1, rng, -2.0, 2.0);
  const int node = tree->atoms(t).front();
  const auto& children = tree->node(node).children;

  auto values_at = [&](const ConditionalValue& y) {
    std::vector<double> v;
    for (int c : children) v.push_back(y.scalar(tree->ordinal(c)));
    return v;
  };

  {
    std::vector<double> zeros(children.size(), 0.0);
    const double g0 = kernel.at(*tree, node, zeros);
    report.add("kernel normalization", g0 == 0.0,
               g0 == 0.0 ? std::string{} : "g(0) = " + std::to_string(g0));
  }
  {
    bool ok = true;
    std::string witness;
    for (std::size_t k = 0; k + 1 < battery.size() && ok; k += 2) {
      auto lo = values_at(battery[k]);
      auto hi = lo;
      for (std::size_t j = 0; j < hi.size(); ++j)
        hi[j] += std::abs(battery[k + 1].scalar(tree->ordinal(children[j])));
      if (kernel.at(*tree, node, hi) < kernel.at(*tree, node, lo) - 1e-10) {
        ok = false;
        witness = "trial " + std::to_string(k);
      }
    }
    report.add("kernel monotonicity", ok, witness);
  }
  {
    bool ok = true;
    std::string witness;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t k = 0; k + 1 < battery.size() && ok; k += 2) {
      const double lam = unit(rng);
      auto a = values_at(battery[k]);
      auto b = values_at(battery[k + 1]);
      auto mix = a;
      for (std::size_t j = 0; j < mix.size(); ++j) mix[j] = lam * a[j] + (1 - lam) * b[j];
      const double lhs = kernel.at(*tree, node, mix);
      const double rhs = lam * kernel.at(*tree, node, a) + (1 - lam) * kernel.at(*tree, node, b);
      if (lhs < rhs - 1e-10) {
        ok = false;
        witness = "trial " + std::to_string(k);
      }
    }
    report.add("kernel concavity", ok, witness);
  }
  return report;
}

void SharingProblem::validate() const {
  if (!tree) throw ConfigError("sharing problem needs a tree");
  if (endowments.size() < 2) throw ConfigError("risk sharing needs at least 2 agents");
  const auto T = static_cast<std::size_t>(tree->horizon());
  for (std::size_t a = 0; a < endowments.size(); ++a) {
    if (endowments[a].size() != T + 1)
      throw ConfigError("agent " + std::to_string(a) + " needs an endowment at every stage");
    for (std::size_t s = 0; s <= T; ++s) {
      const auto& h = endowments[a][s];
      if (h.stage() != static_cast<int>(s) || h.payload() != Payload::Scalar)
        throw ConfigError("agent " + std::to_string(a) + ": endowment at index " +
                          std::to_string(s) + " is not a stage-" + std::to_string(s) + " scalar");
      for (std::size_t i = 0; i < h.size(); ++i)
        if (!(h.scalar(i) > 0.0))
          throw ConfigError("agent " + std::to_string(a) + ": endowment must be strictly positive");
    }
  }
}

ConditionalValue SharingProblem::aggregate(int stage) const {
  ConditionalValue::ScalarData sum(tree->stage_size(stage), 0.0);
  for (const auto& per_agent : endowments)
    for (std::size_t i = 0; i < sum.size(); ++i)
      sum[i] += per_agent[static_cast<std::size_t>(stage)].scalar(i);
  return ConditionalValue::scalars(tree, stage, std::move(sum));
}

std::vector<std::vector<ConditionalValue>> closed_form_allocation(const SharingProblem& problem,
                                                                  int t) {
  problem.validate();
  const ScenarioTree& tree = *problem.tree;
  const int T = tree.horizon();
  if (t < 0 || t > T) throw ConfigError("allocation stage out of range");
  const auto h_t = problem.aggregate(t);

  std::vector<std::vector<ConditionalValue>> out(problem.agent_count());
  for (std::size_t a = 0; a < problem.agent_count(); ++a) {
    const auto& h_a = problem.endowments[a][static_cast<std::size_t>(t)];
    for (int s = t + 1; s <= T; ++s) {
      const auto h_s = problem.aggregate(s);
      ConditionalValue::ScalarData vals(tree.stage_size(s));
      for (std::size_t i = 0; i < vals.size(); ++i) {
        const int id = tree.atoms(s)[i];
        const std::size_t anc = tree.ordinal(tree.ancestor(id, t));
        vals[i] = h_a.scalar(anc) / h_t.scalar(anc) * h_s.scalar(i);
      }
      out[a].push_back(ConditionalValue::scalars(problem.tree, s, std::move(vals)));
    }
  }
  return out;
}

ConditionalValue ybar_recursion(const SharingProblem& problem, int t) {
  problem.validate();
  const ScenarioTree& tree = *problem.tree;
  const int T = tree.horizon();
  if (t < 0 || t > T) throw ConfigError("recursion stage out of range");

  ConditionalValue w = problem.aggregate(T);
  for (int s = T - 1; s >= t; --s) {
    const auto h_s = problem.aggregate(s);
    ConditionalValue::ScalarData vals(tree.stage_size(s));
    std::vector<double> scaled;
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const int id = tree.atoms(s)[i];
      const double h = h_s.scalar(i);
      if (!(h > 0.0)) throw ConfigError("nonpositive aggregate endowment");
      scaled.clear();
      for (int c : tree.node(id).children) scaled.push_back(w.scalar(tree.ordinal(c)) / h);
      vals[i] = h * problem.kernel.at(tree, id, scaled);
    }
    w = ConditionalValue::scalars(problem.tree, s, std::move(vals));
  }
  return w;
}

ConditionalValue sharing_objective(const SharingProblem& problem, int t,
                                   const std::vector<std::vector<ConditionalValue>>& allocation) {
  problem.validate();
  const ScenarioTree& tree = *problem.tree;
  const int T = tree.horizon();
  if (allocation.size() != problem.agent_count())
    throw ConfigError("allocation must cover every agent");
  if (t == T) return problem.aggregate(T);

  ConditionalValue::ScalarData total(tree.stage_size(t), 0.0);
  for (std::size_t a = 0; a < problem.agent_count(); ++a) {
    if (static_cast<int>(allocation[a].size()) != T - t)
      throw ConfigError("agent " + std::to_string(a) + ": allocation must cover stages t+1..T");
    auto x_at = [&](int s, std::size_t i) {
      return s == t ? problem.endowments[a][static_cast<std::size_t>(t)].scalar(i)
                    : allocation[a][static_cast<std::size_t>(s - t - 1)].scalar(i);
    };
    // Backward composition of u_s(x, y) = x g(y / x) per agent.
    ConditionalValue val = allocation[a].back();
    for (int s = T - 1; s >= t; --s) {
      ConditionalValue::ScalarData vals(tree.stage_size(s));
      std::vector<double> scaled;
      for (std::size_t i = 0; i < vals.size(); ++i) {
        const int id = tree.atoms(s)[i];
        const double x = x_at(s, i);
        if (!(x > 0.0))
          throw ConfigError("allocation must be strictly positive (agent " + std::to_string(a) +
                            ")");
        scaled.clear();
        for (int c : tree.node(id).children) scaled.push_back(val.scalar(tree.ordinal(c)) / x);
        vals[i] = x * problem.kernel.at(tree, id, scaled);
      }
      val = ConditionalValue::scalars(problem.tree, s, std::move(vals));
    }
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += val.scalar(i);
  }
  return ConditionalValue::scalars(problem.tree, t, std::move(total));
}

namespace {

/// Compositions of m into `agents` parts, each part >= 1, as shares k/m.
std::vector<std::vector<double>> simplex_lattice(int m, std::size_t agents) {
  std::vector<std::vector<double>> out;
  std::vector<int> parts(agents, 1);
  const int extra = m - static_cast<int>(agents);
  if (extra < 0) throw ConfigError("simplex lattice denominator too small for the agent count");
  // Enumerate weak compositions of `extra` over `agents` slots.
  std::vector<int> bump(agents, 0);
  while (true) {
    int used = 0;
    for (std::size_t a = 0; a + 1 < agents; ++a) used += bump[a];
    if (used <= extra) {
      bump[agents - 1] = extra - used;
      std::vector<double> shares(agents);
      for (std::size_t a = 0; a < agents; ++a)
        shares[a] = static_cast<double>(parts[a] + bump[a]) / static_cast<double>(m);
      out.push_back(std::move(shares));
    }
    // Odometer over the first agents-1 slots, each in [0, extra].
    std::size_t a = 0;
    for (; a + 1 < agents; ++a) {
      if (++bump[a] <= extra) break;
      bump[a] = 0;
    }
    if (a + 1 >= agents) break;
  }
  return out;
}

}  // namespace

CheckReport numeric_cross_check(const SharingProblem& problem, int t,
                                const SimplexGridConfig& config) {
  problem.validate();
  CheckReport report;
  const ScenarioTree& tree = *problem.tree;
  const int T = tree.horizon();
  const std::size_t agents = problem.agent_count();
  const auto ybar = ybar_recursion(problem, t);

  // Closed form attains the recursion value.
  {
    const auto alloc = closed_form_allocation(problem, t);
    const auto obj = sharing_objective(problem, t, alloc);
    bool ok = true;
    std::string witness;
    for (std::size_t i = 0; i < obj.size(); ++i)
      if (std::abs(obj.scalar(i) - ybar.scalar(i)) > 1e-10) {
        ok = false;
        witness = "node ordinal " + std::to_string(i) + ": objective " +
                  std::to_string(obj.scalar(i)) + " vs recursion " + std::to_string(ybar.scalar(i));
        break;
      }
    report.add("closed form attains the recursion value", ok, witness);
  }

  // Lattice sweep over per-node share assignments at stages t+1..T.
  const auto lattice = simplex_lattice(config.denominator, agents);
  std::vector<std::pair<int, std::size_t>> sites;  // (stage, node ordinal)
  for (int s = t + 1; s <= T; ++s)
    for (std::size_t i = 0; i < tree.stage_size(s); ++i) sites.emplace_back(s, i);

  double combos = 1.0;
  for (std::size_t k = 0; k < sites.size(); ++k) combos *= static_cast<double>(lattice.size());
  const bool enumerate = combos <= static_cast<double>(config.budget);
  const std::size_t n_draws =
      enumerate ? static_cast<std::size_t>(combos) : config.budget;

  std::vector<ConditionalValue> aggregates;
  for (int s = t + 1; s <= T; ++s) aggregates.push_back(problem.aggregate(s));

  Rng rng(config.seed);
  std::vector<std::size_t> pick(sites.size(), 0);
  double grid_max = ext::kNegInf;
  double worst_excess = ext::kNegInf;
  std::string witness;
  bool ok = true;

  for (std::size_t draw = 0; draw < n_draws; ++draw) {
    if (!enumerate)
      for (auto& p : pick) p = rng() % lattice.size();

    std::vector<std::vector<ConditionalValue>> alloc(agents);
    for (std::size_t a = 0; a < agents; ++a) {
      for (int s = t + 1; s <= T; ++s) {
        ConditionalValue::ScalarData vals(tree.stage_size(s));
        alloc[a].push_back(ConditionalValue::scalars(problem.tree, s, std::move(vals)));
      }
    }
    for (std::size_t k = 0; k < sites.size(); ++k) {
      const auto [s, i] = sites[k];
      const auto& shares = lattice[pick[k]];
      const double h = aggregates[static_cast<std::size_t>(s - t - 1)].scalar(i);
      for (std::size_t a = 0; a < agents; ++a) {
        auto& cv = alloc[a][static_cast<std::size_t>(s - t - 1)];
        ConditionalValue::ScalarData vals = cv.scalar_data();
        vals[i] = shares[a] * h;
        cv = ConditionalValue::scalars(problem.tree, s, std::move(vals));
      }
    }

    const auto obj = sharing_objective(problem, t, alloc);
    for (std::size_t i = 0; i < obj.size(); ++i) {
      grid_max = std::max(grid_max, obj.scalar(i));
      const double excess = obj.scalar(i) - ybar.scalar(i);
      worst_excess = std::max(worst_excess, excess);
      if (excess > 1e-8 && ok) {
        ok = false;
        witness = "draw " + std::to_string(draw) + ", node ordinal " + std::to_string(i) +
                  ": exceeds by " + std::to_string(excess);
      }
    }

    if (enumerate) {
      std::size_t k = 0;
      for (; k < sites.size(); ++k) {
        if (++pick[k] < lattice.size()) break;
        pick[k] = 0;
      }
      if (k == sites.size()) break;
    }
  }

  report.add("no lattice allocation dominates", ok,
             ok ? "grid max " + std::to_string(grid_max) + ", worst excess " +
                      std::to_string(worst_excess) + " over " + std::to_string(n_draws) + " draws"
                : witness);
  return report;
}

}  // namespace treedp

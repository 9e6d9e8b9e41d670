#include "treedp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "maximize.hpp"
#include "treedp/errors.hpp"
#include "treedp/extended.hpp"

namespace treedp {

namespace {

constexpr std::size_t kBruteForceBudget = 10'000'000;
constexpr std::size_t kExactStateBudget = 1'000'000;

void parallel_for(std::size_t total, int workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers <= 1 || total < 64) {
    for (std::size_t i = 0; i < total; ++i) fn(i);
    return;
  }
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(workers), total);
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (std::size_t w = 0; w < n_threads; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < total; i += n_threads) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

std::vector<double> make_grid(double lo, double hi, int points) {
  if (hi - lo < 1e-14) return {lo};
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    g[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / (points - 1);
  return g;
}

double objective(const Problem& problem, int t, const TreeNode& node, double x,
                 std::span<const double> z, const ValueFunction& next) {
  const ScenarioTree& tree = *problem.tree;
  std::vector<double> child_y(node.children.size());
  for (std::size_t j = 0; j < child_y.size(); ++j) {
    const int c = node.children[j];
    child_y[j] = next(tree.ordinal(c), problem.forward.step(tree, c, x, z));
  }
  return problem.backward[static_cast<std::size_t>(t)].aggregate(tree, node.id, x, child_y, z);
}

struct Inner {
  double value = ext::kNegInf;
  std::vector<double> control;
};

/// Discrete argmax with the lexicographic tie rule, optionally refined by a
/// feasibility-constrained pattern search.
Inner maximize_at(const Problem& problem, int t, const TreeNode& node, std::size_t ordinal,
                  double x, const ValueFunction& next, const GridConfig& config) {
  const ControlSetSpec& spec = problem.controls[static_cast<std::size_t>(t)];
  std::vector<std::vector<double>> candidates;
  try {
    candidates = spec.discretize(ordinal, x, config.control_resolution);
  } catch (const ResolutionError&) {
    // Empty feasible set: the supremum over it is -inf and no control is
    // stored; the caller decides whether that state is actually visited.
    return Inner{};
  }

  std::vector<double> vals(candidates.size());
  for (std::size_t k = 0; k < candidates.size(); ++k)
    vals[k] = objective(problem, t, node, x, candidates[k], next);

  Inner best;
  for (double v : vals) best.value = std::max(best.value, v);
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (vals[k] < best.value - kTieTol) continue;
    if (best.control.empty() ||
        std::lexicographical_compare(candidates[k].begin(), candidates[k].end(),
                                     best.control.begin(), best.control.end()))
      best.control = candidates[k];
  }

  if (config.polish && spec.kind() != ControlSetSpec::Kind::ExplicitGrid &&
      ext::is_finite(best.value)) {
    auto f = [&](std::span<const double> z) { return objective(problem, t, node, x, z, next); };
    auto admissible = [&](std::span<const double> z) { return spec.feasible(ordinal, x, z); };
    auto polished = detail::pattern_search_max(f, best.control, config.control_resolution,
                                               config.polish_tol, admissible);
    if (polished.value > best.value) {
      best.value = polished.value;
      best.control = std::move(polished.argmax);
    }
  }
  return best;
}

/// Forward hull of the next-stage states over the control ball of radius m.
std::pair<double, double> reach_hull(const Problem& problem, const TreeNode& node, double x,
                                     double m) {
  const ScenarioTree& tree = *problem.tree;
  double lo = ext::kPosInf, hi = ext::kNegInf;
  switch (problem.forward.kind()) {
    case ForwardGenerator::Kind::WealthConsumption:
    case ForwardGenerator::Kind::SelfFinancing: {
      const double c_max =
          problem.forward.kind() == ForwardGenerator::Kind::WealthConsumption ? std::max(x, 0.0)
                                                                              : 0.0;
      for (int c : tree.node(node.id).children) {
        double s2 = 0.0;
        for (double s : tree.node(c).shock) s2 += s * s;
        const double swing = m * std::sqrt(s2);
        lo = std::min(lo, x - swing - c_max);
        hi = std::max(hi, x + swing);
      }
      break;
    }
    case ForwardGenerator::Kind::PortfolioIdentity:
      lo = -m;
      hi = m;
      break;
    case ForwardGenerator::Kind::Custom: {
      const int d =
          problem.controls[static_cast<std::size_t>(node.stage)].dim(tree.ordinal(node.id), x);
      std::vector<double> z(static_cast<std::size_t>(d), 0.0);
      std::vector<int> idx(static_cast<std::size_t>(d), 0);
      const double levels[3] = {-m, 0.0, m};
      const std::size_t total = static_cast<std::size_t>(std::pow(3.0, d));
      for (std::size_t count = 0; count < total; ++count) {
        for (int i = 0; i < d; ++i) z[static_cast<std::size_t>(i)] = levels[idx[static_cast<std::size_t>(i)]];
        for (int c : tree.node(node.id).children) {
          const double v = problem.forward.step(tree, c, x, z);
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        for (int i = 0; i < d; ++i) {
          if (++idx[static_cast<std::size_t>(i)] < 3) break;
          idx[static_cast<std::size_t>(i)] = 0;
        }
      }
      break;
    }
  }
  return {lo, hi};
}

std::vector<std::pair<double, double>> propagate_bounds(const Problem& problem, double x0,
                                                        const GridConfig& config) {
  const ScenarioTree& tree = *problem.tree;
  const int T = tree.horizon();
  std::vector<std::pair<double, double>> bounds(static_cast<std::size_t>(T) + 1);
  bounds[0] = config.state_bounds.value_or(std::make_pair(x0, x0));
  if (bounds[0].first > bounds[0].second)
    throw ConfigError("state bounds must satisfy lo <= hi");
  for (int t = 0; t < T; ++t) {
    double lo = ext::kPosInf, hi = ext::kNegInf;
    const ControlSetSpec& spec = problem.controls[static_cast<std::size_t>(t)];
    for (int id : tree.atoms(t)) {
      const TreeNode& node = tree.node(id);
      const std::size_t ord = tree.ordinal(id);
      for (double xe : {bounds[static_cast<std::size_t>(t)].first,
                        bounds[static_cast<std::size_t>(t)].second}) {
        const double m = spec.bounding_radius(ord, xe);
        auto [l, h] = reach_hull(problem, node, xe, m);
        lo = std::min(lo, l);
        hi = std::max(hi, h);
      }
    }
    const double pad = 0.1 * std::max(hi - lo, 1.0);
    bounds[static_cast<std::size_t>(t) + 1] = {lo - pad, hi + pad};
  }
  return bounds;
}

bool all_explicit(const Problem& problem) {
  for (const auto& spec : problem.controls)
    if (spec.kind() != ControlSetSpec::Kind::ExplicitGrid) return false;
  return !problem.controls.empty();
}

/// Exact reachable states per node under explicit control grids.
std::vector<std::vector<std::vector<double>>> reachable_states(const Problem& problem, double x0) {
  const ScenarioTree& tree = *problem.tree;
  const int T = tree.horizon();
  std::vector<std::vector<std::vector<double>>> states(static_cast<std::size_t>(T) + 1);
  for (int t = 0; t <= T; ++t)
    states[static_cast<std::size_t>(t)].resize(tree.stage_size(t));
  states[0][0] = {x0};
  std::size_t total = 1;
  for (int t = 0; t < T; ++t) {
    const ControlSetSpec& spec = problem.controls[static_cast<std::size_t>(t)];
    for (int id : tree.atoms(t)) {
      const TreeNode& node = tree.node(id);
      const std::size_t ord = tree.ordinal(id);
      for (double x : states[static_cast<std::size_t>(t)][ord]) {
        for (const auto& z : spec.grid_points(ord)) {
          for (int c : node.children) {
            states[static_cast<std::size_t>(t) + 1][tree.ordinal(c)].push_back(
                problem.forward.step(tree, c, x, z));
            if (++total > kExactStateBudget)
              throw ResolutionError("exact-state enumeration exceeds the budget");
          }
        }
      }
    }
    for (auto& per_node : states[static_cast<std::size_t>(t) + 1]) {
      std::sort(per_node.begin(), per_node.end());
      per_node.erase(std::unique(per_node.begin(), per_node.end()), per_node.end());
    }
  }
  return states;
}

}  // namespace

ValueFunction::ValueFunction(int stage, std::vector<std::vector<double>> grids,
                             std::vector<std::vector<double>> values)
    : stage_(stage), grids_(std::move(grids)), values_(std::move(values)) {
  if (grids_.size() != values_.size()) throw ConfigError("value function: grid/value size mismatch");
  for (std::size_t i = 0; i < grids_.size(); ++i) {
    if (grids_[i].empty() || grids_[i].size() != values_[i].size())
      throw ConfigError("value function: malformed node entry");
    for (std::size_t j = 1; j < grids_[i].size(); ++j)
      if (!(grids_[i][j] > grids_[i][j - 1]))
        throw ConfigError("value function: grid must be strictly increasing");
  }
}

double ValueFunction::operator()(std::size_t node_ordinal, double x) const {
  const auto& g = grids_.at(node_ordinal);
  const auto& v = values_.at(node_ordinal);
  if (x <= g.front()) return v.front();
  if (x >= g.back()) return v.back();
  const auto it = std::upper_bound(g.begin(), g.end(), x);
  const std::size_t j = static_cast<std::size_t>(it - g.begin());
  const double t = (x - g[j - 1]) / (g[j] - g[j - 1]);
  return ext::lerp(v[j - 1], v[j], t);
}

SolveResult solve_backward(const Problem& problem, double x0, const GridConfig& config) {
  problem.validate();
  const ScenarioTree& tree = *problem.tree;
  const int T = tree.horizon();
  if (config.state_points < 2 && !all_explicit(problem))
    throw ConfigError("state grid needs at least 2 points");

  SolveResult result;
  result.policy = Policy(T);
  result.diagnostics.exact_mode = all_explicit(problem);

  // Stage grids: exact reachable states under explicit grids, else forward-
  // propagated intervals.
  std::vector<std::vector<std::vector<double>>> grids(static_cast<std::size_t>(T) + 1);
  if (result.diagnostics.exact_mode) {
    grids = reachable_states(problem, x0);
  } else {
    const auto bounds = propagate_bounds(problem, x0, config);
    for (int t = 0; t <= T; ++t) {
      const double lo = bounds[static_cast<std::size_t>(t)].first;
      const double hi = bounds[static_cast<std::size_t>(t)].second;
      std::optional<double> floor;
      if (t < T) floor = problem.controls[static_cast<std::size_t>(t)].state_floor();
      std::vector<double> g;
      if (floor && *floor > lo && *floor < hi) {
        // Domain edge inside the range: one sentinel below it (the value is
        // -inf there anyway), then a quadratically graded grid from the edge
        // up. The grading equalizes the interpolation error where the value
        // function's curvature blows up towards the edge, and refining via
        // 2n-1 points keeps the grids nested.
        g.push_back(lo);
        const int m = config.state_points - 1;
        for (int k = 0; k < m; ++k) {
          const double u = static_cast<double>(k) / (m - 1);
          g.push_back(*floor + (hi - *floor) * u * u);
        }
        g.erase(std::unique(g.begin(), g.end()), g.end());
      } else {
        g = make_grid(lo, hi, config.state_points);
      }
      grids[static_cast<std::size_t>(t)].assign(tree.stage_size(t), g);
    }
  }

  // Terminal stage.
  std::vector<ValueFunction> vfs;
  vfs.reserve(static_cast<std::size_t>(T) + 1);
  {
    std::vector<std::vector<double>> vals(tree.stage_size(T));
    for (int id : tree.atoms(T)) {
      const std::size_t ord = tree.ordinal(id);
      vals[ord].resize(grids[static_cast<std::size_t>(T)][ord].size());
      for (std::size_t j = 0; j < vals[ord].size(); ++j)
        vals[ord][j] = problem.terminal.value(tree, id, grids[static_cast<std::size_t>(T)][ord][j]);
    }
    vfs.emplace_back(T, grids[static_cast<std::size_t>(T)], std::move(vals));
  }

  // Backward sweep; stage t+1 values are frozen before stage t starts.
  for (int t = T - 1; t >= 0; --t) {
    const ValueFunction& next = vfs.back();
    const auto atoms = tree.atoms(t);
    const auto& stage_grids = grids[static_cast<std::size_t>(t)];

    std::vector<std::size_t> offsets(atoms.size() + 1, 0);
    for (std::size_t i = 0; i < atoms.size(); ++i)
      offsets[i + 1] = offsets[i] + stage_grids[i].size();
    const std::size_t total = offsets.back();

    std::vector<std::vector<double>> vals(atoms.size());
    std::vector<std::vector<std::vector<double>>> pol(atoms.size());
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      vals[i].assign(stage_grids[i].size(), 0.0);
      pol[i].resize(stage_grids[i].size());
    }

    std::vector<std::string> errors(total);
    parallel_for(total, config.workers, [&](std::size_t flat) {
      const std::size_t i =
          static_cast<std::size_t>(std::upper_bound(offsets.begin(), offsets.end(), flat) -
                                   offsets.begin()) -
          1;
      const std::size_t j = flat - offsets[i];
      const TreeNode& node = tree.node(atoms[i]);
      try {
        Inner inner = maximize_at(problem, t, node, i, stage_grids[i][j], next, config);
        vals[i][j] = inner.value;
        pol[i][j] = std::move(inner.control);
      } catch (const std::exception& e) {
        errors[flat] = e.what();
      }
    });
    for (std::size_t flat = 0; flat < total; ++flat)
      if (!errors[flat].empty())
        throw InfeasibleError("stage " + std::to_string(t) + ": " + errors[flat]);

    for (std::size_t i = 0; i < atoms.size(); ++i) {
      double region_lo = ext::kPosInf, region_hi = ext::kNegInf;
      for (std::size_t j = 0; j < vals[i].size(); ++j)
        if (ext::is_neg_inf(vals[i][j])) {
          region_lo = std::min(region_lo, stage_grids[i][j]);
          region_hi = std::max(region_hi, stage_grids[i][j]);
        }
      if (region_lo <= region_hi)
        result.diagnostics.warnings.push_back(
            "value -inf at stage " + std::to_string(t) + ", node " + std::to_string(atoms[i]) +
            ", states [" + std::to_string(region_lo) + ", " + std::to_string(region_hi) + "]");
    }

    result.policy.storage()[static_cast<std::size_t>(t)] = std::move(pol);
    vfs.emplace_back(t, stage_grids, std::move(vals));
  }

  std::reverse(vfs.begin(), vfs.end());
  result.values = std::move(vfs);
  return result;
}

Trajectory extract_policy(const Problem& problem, const SolveResult& result, double x0,
                          const GridConfig& config) {
  const ScenarioTree& tree = *problem.tree;
  const int T = tree.horizon();
  const auto root_grid = result.values[0].grid(0);
  const double span = std::max(root_grid.back() - root_grid.front(), 1.0);
  if (x0 < root_grid.front() - 1e-7 * span || x0 > root_grid.back() + 1e-7 * span)
    throw ConfigError("initial state " + std::to_string(x0) + " lies outside the root grid [" +
                      std::to_string(root_grid.front()) + ", " + std::to_string(root_grid.back()) +
                      "]");

  Trajectory traj;
  traj.state.assign(static_cast<std::size_t>(tree.node_count()), 0.0);
  traj.control.resize(static_cast<std::size_t>(tree.node_count()));
  traj.state[0] = x0;
  traj.y0 = result.values[0](0, x0);

  for (int t = 0; t < T; ++t) {
    const ValueFunction& next = result.values[static_cast<std::size_t>(t) + 1];
    for (int id : tree.atoms(t)) {
      const TreeNode& node = tree.node(id);
      const std::size_t ord = tree.ordinal(id);
      const double x = traj.state[static_cast<std::size_t>(id)];
      Inner inner = maximize_at(problem, t, node, ord, x, next, config);
      if (inner.control.empty())
        throw InfeasibleError("empty feasible set on the realized path at node " +
                              std::to_string(id) + " (state " + std::to_string(x) + ")");
      traj.control[static_cast<std::size_t>(id)] = inner.control;
      for (int c : node.children) {
        const double xc = problem.forward.step(tree, c, x, inner.control);
        const auto g = next.grid(tree.ordinal(c));
        const double child_span = std::max(g.back() - g.front(), 1.0);
        if (xc < g.front() - 1e-6 * child_span || xc > g.back() + 1e-6 * child_span)
          throw DivergenceError("rollout escaped the state grid at node " + std::to_string(c) +
                                " (state " + std::to_string(xc) + ")");
        traj.state[static_cast<std::size_t>(c)] = xc;
      }
    }
  }

  // Recursive value of the realized process, composed leaf-to-root.
  std::vector<double> val(static_cast<std::size_t>(tree.node_count()), 0.0);
  for (int id = tree.node_count() - 1; id >= 0; --id) {
    const TreeNode& node = tree.node(id);
    if (node.stage == T) {
      val[static_cast<std::size_t>(id)] =
          problem.terminal.value(tree, id, traj.state[static_cast<std::size_t>(id)]);
      continue;
    }
    std::vector<double> child_y(node.children.size());
    for (std::size_t j = 0; j < child_y.size(); ++j)
      child_y[j] = val[static_cast<std::size_t>(node.children[j])];
    val[static_cast<std::size_t>(id)] = problem.backward[static_cast<std::size_t>(node.stage)].aggregate(
        tree, id, traj.state[static_cast<std::size_t>(id)], child_y,
        traj.control[static_cast<std::size_t>(id)]);
  }
  traj.achieved_value = val[0];
  return traj;
}

BruteForceResult brute_force_value(const Problem& problem, double x0) {
  problem.validate();
  if (!all_explicit(problem))
    throw ConfigError("brute force needs explicit control grids at every stage");
  const ScenarioTree& tree = *problem.tree;
  const int T = tree.horizon();

  std::vector<int> decision_nodes;
  std::size_t assignments = 1;
  for (int id = 0; id < tree.node_count(); ++id) {
    const TreeNode& n = tree.node(id);
    if (n.stage == T) continue;
    decision_nodes.push_back(id);
    const auto& pts =
        problem.controls[static_cast<std::size_t>(n.stage)].grid_points(tree.ordinal(id));
    if (assignments > kBruteForceBudget / pts.size())
      throw Error("combinatorial budget exceeded: more than " +
                  std::to_string(kBruteForceBudget) + " control assignments");
    assignments *= pts.size();
  }

  std::vector<std::size_t> choice(decision_nodes.size(), 0);
  std::vector<double> state(static_cast<std::size_t>(tree.node_count()), 0.0);
  std::vector<double> value(static_cast<std::size_t>(tree.node_count()), 0.0);

  BruteForceResult best;
  best.value = ext::kNegInf;
  best.controls.resize(static_cast<std::size_t>(tree.node_count()));

  for (std::size_t count = 0; count < assignments; ++count) {
    state[0] = x0;
    for (std::size_t k = 0; k < decision_nodes.size(); ++k) {
      const int id = decision_nodes[k];
      const TreeNode& n = tree.node(id);
      const auto& z =
          problem.controls[static_cast<std::size_t>(n.stage)].grid_points(tree.ordinal(id))[choice[k]];
      for (int c : n.children)
        state[static_cast<std::size_t>(c)] =
            problem.forward.step(tree, c, state[static_cast<std::size_t>(id)], z);
    }
    for (int id = tree.node_count() - 1; id >= 0; --id) {
      const TreeNode& n = tree.node(id);
      if (n.stage == T) {
        value[static_cast<std::size_t>(id)] =
            problem.terminal.value(tree, id, state[static_cast<std::size_t>(id)]);
        continue;
      }
      const std::size_t k = static_cast<std::size_t>(
          std::lower_bound(decision_nodes.begin(), decision_nodes.end(), id) -
          decision_nodes.begin());
      const auto& z =
          problem.controls[static_cast<std::size_t>(n.stage)].grid_points(tree.ordinal(id))[choice[k]];
      std::vector<double> child_y(n.children.size());
      for (std::size_t j = 0; j < child_y.size(); ++j)
        child_y[j] = value[static_cast<std::size_t>(n.children[j])];
      value[static_cast<std::size_t>(id)] = problem.backward[static_cast<std::size_t>(n.stage)].aggregate(
          tree, id, state[static_cast<std::size_t>(id)], child_y, z);
    }
    if (value[0] > best.value) {
      best.value = value[0];
      for (std::size_t k = 0; k < decision_nodes.size(); ++k) {
        const int id = decision_nodes[k];
        const TreeNode& n = tree.node(id);
        best.controls[static_cast<std::size_t>(id)] =
            problem.controls[static_cast<std::size_t>(n.stage)].grid_points(
                tree.ordinal(id))[choice[k]];
      }
    }
    for (std::size_t k = 0; k < decision_nodes.size(); ++k) {
      const int id = decision_nodes[k];
      const TreeNode& n = tree.node(id);
      const std::size_t sz =
          problem.controls[static_cast<std::size_t>(n.stage)].grid_points(tree.ordinal(id)).size();
      if (++choice[k] < sz) break;
      choice[k] = 0;
    }
  }
  return best;
}

CheckReport verify_k_bound(const Problem& problem, const SolveResult& result, double k_bound) {
  CheckReport report;
  const ScenarioTree& tree = *problem.tree;
  const int T = tree.horizon();
  constexpr double tol = 1e-6;

  for (int t = 0; t <= T; ++t) {
    const ValueFunction& vf = result.values[static_cast<std::size_t>(t)];
    const double cap = static_cast<double>(T - t) * k_bound;
    bool ok = true;
    std::string witness;
    for (std::size_t i = 0; i < vf.node_count() && ok; ++i) {
      auto g = vf.grid(i);
      auto v = vf.values(i);
      for (std::size_t j = 0; j < g.size(); ++j) {
        const double gap = v[j] - g[j];
        if (gap < -tol || gap > cap + tol) {
          ok = false;
          witness = "stage " + std::to_string(t) + ", node ordinal " + std::to_string(i) +
                    ", state " + std::to_string(g[j]) + ": y - x = " + std::to_string(gap) +
                    " outside [0, " + std::to_string(cap) + "]";
          break;
        }
      }
    }
    report.add("sandwich bound at stage " + std::to_string(t), ok, witness);
  }

  for (int t = 0; t < T; ++t) {
    const double offset = static_cast<double>(T - t - 1) * k_bound;
    bool ok = true;
    std::string witness;
    const ValueFunction& vf = result.values[static_cast<std::size_t>(t)];
    for (std::size_t i = 0; i < vf.node_count() && ok; ++i) {
      const int id = tree.atoms(t)[i];
      const TreeNode& node = tree.node(id);
      auto g = vf.grid(i);
      for (std::size_t j = 0; j < g.size(); ++j) {
        auto z = result.policy.at(t, i, j);
        if (z.empty()) continue;  // empty feasible set, value -inf
        std::vector<double> next(node.children.size());
        for (std::size_t q = 0; q < next.size(); ++q)
          next[q] = problem.forward.step(tree, node.children[q], g[j], z);
        const double score = problem.backward[static_cast<std::size_t>(t)].aggregate(
            tree, id, g[j], next, z);
        if (score < g[j] - offset - tol) {
          ok = false;
          witness = "stage " + std::to_string(t) + ", node ordinal " + std::to_string(i) +
                    ", state " + std::to_string(g[j]) + ": one-step score " +
                    std::to_string(score) + " below " + std::to_string(g[j] - offset);
          break;
        }
      }
    }
    report.add("optimal controls in the level set at stage " + std::to_string(t), ok, witness);
  }
  return report;
}

RefinementDiag refinement_study(const Problem& problem, double x0, const GridConfig& base,
                                int levels) {
  RefinementDiag diag;
  GridConfig cfg = base;
  for (int l = 0; l <= levels; ++l) {
    auto result = solve_backward(problem, x0, cfg);
    diag.y0.push_back(result.values[0](0, x0));
    cfg.state_points = 2 * cfg.state_points - 1;
    cfg.control_resolution *= 0.5;
  }
  for (std::size_t l = 0; l + 1 < diag.y0.size(); ++l)
    diag.deltas.push_back(std::abs(diag.y0[l + 1] - diag.y0[l]));
  if (diag.deltas.size() >= 2)
    diag.ratio = diag.deltas[1] > 0.0 ? diag.deltas[0] / diag.deltas[1] : ext::kPosInf;
  return diag;
}

}  // namespace treedp

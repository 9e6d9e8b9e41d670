// Acceptance suite: one line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include "test_support.hpp"
#include "treedp/battery.hpp"
#include "treedp/commands.hpp"
#include "treedp/config.hpp"
#include "treedp/errors.hpp"
#include "treedp/extended.hpp"
#include "treedp/random_sets.hpp"
#include "treedp/risk_sharing.hpp"
#include "treedp/solver.hpp"

using namespace treedp;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", criterion, pass ? "PASS" : "FAIL", detail.c_str());
  if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

TreePtr binomial_ptr(int horizon, double p) {
  return std::make_shared<const ScenarioTree>(ScenarioTree::binomial(horizon, p));
}

// --- 1. recursion vs exhaustive enumeration on explicit grids -------------

void criterion_1() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(1001);
  int checked = 0;
  double worst = 0.0;
  bool pass = true;
  std::string detail;
  for (int trial = 0; trial < 50; ++trial) {
    auto problem = testing::random_explicit_problem(rng, 60000);
    const double x0 = 0.5 + static_cast<double>(rng() % 128) / 64.0;
    auto result = solve_backward(problem, x0, GridConfig{});
    if (!result.diagnostics.exact_mode) {
      pass = false;
      detail = "solver did not take the exact path";
      break;
    }
    const double recursion = result.values[0](0, x0);
    const double enumerated = brute_force_value(problem, x0).value;
    const double err = std::abs(recursion - enumerated) / std::max(1.0, std::abs(enumerated));
    worst = std::max(worst, err);
    ++checked;
    if (err > 1e-12) {
      pass = false;
      detail = "trial " + std::to_string(trial) + " differs by " + std::to_string(err);
      break;
    }
  }
  const double elapsed = seconds_since(start);
  if (pass && elapsed >= 60.0) {
    pass = false;
    detail = "runtime " + std::to_string(elapsed) + "s exceeds 60s";
  }
  if (pass) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d problems, worst relative gap %.3g, %.2fs", checked, worst,
                  elapsed);
    detail = buf;
  }
  report(1, pass, detail);
}

// --- 2. proportional sharing is optimal -----------------------------------

double independent_objective(const SharingProblem& problem,
                             const std::vector<std::vector<ConditionalValue>>& alloc) {
  // Per-agent backward composition of u_s(x, y) = x (-log E[exp(-y/x)]),
  // written directly against the tree; no shared code with the recursion.
  const ScenarioTree& tree = *problem.tree;
  const int T = tree.horizon();
  double total = 0.0;
  for (std::size_t a = 0; a < problem.endowments.size(); ++a) {
    std::vector<double> val(static_cast<std::size_t>(tree.node_count()), 0.0);
    for (int id = tree.node_count() - 1; id >= 0; --id) {
      const TreeNode& n = tree.node(id);
      const double x = n.stage == 0
                           ? problem.endowments[a][0].scalar(0)
                           : (n.stage == T ? 0.0 : alloc[a][static_cast<std::size_t>(n.stage - 1)]
                                                       .scalar(tree.ordinal(id)));
      if (n.stage == T) {
        val[static_cast<std::size_t>(id)] =
            alloc[a][static_cast<std::size_t>(T - 1)].scalar(tree.ordinal(id));
        continue;
      }
      double mean = 0.0;
      for (int c : n.children)
        mean += tree.node(c).edge_prob * std::exp(-val[static_cast<std::size_t>(c)] / x);
      val[static_cast<std::size_t>(id)] = x * (-std::log(mean));
    }
    total += val[0];
  }
  return total;
}

void criterion_2() {
  Rng rng(2002);
  bool pass = true;
  std::string detail;
  int instances = 0;
  std::uniform_real_distribution<double> endow(0.3, 3.0);
  for (int trial = 0; trial < 20 && pass; ++trial) {
    auto tree = std::make_shared<const ScenarioTree>(random_tree(rng, 3, 3));
    SharingProblem problem;
    problem.tree = tree;
    const std::size_t agents = 2 + rng() % 2;
    for (std::size_t a = 0; a < agents; ++a) {
      std::vector<ConditionalValue> process;
      for (int s = 0; s <= tree->horizon(); ++s) {
        ConditionalValue::ScalarData vals(tree->stage_size(s));
        for (double& v : vals) v = endow(rng);
        process.push_back(ConditionalValue::scalars(tree, s, std::move(vals)));
      }
      problem.endowments.push_back(std::move(process));
    }
    ++instances;

    const auto alloc = closed_form_allocation(problem, 0);
    const double ybar = ybar_recursion(problem, 0).scalar(0);
    const double direct = independent_objective(problem, alloc);
    if (std::abs(direct - ybar) > 1e-10) {
      pass = false;
      detail = "trial " + std::to_string(trial) + ": closed form gives " + std::to_string(direct) +
               " vs recursion " + std::to_string(ybar);
      break;
    }

    // At least 1e3 alternative allocations from the rational lattice.
    std::size_t sites = 0;
    for (int s = 1; s <= tree->horizon(); ++s) sites += tree->stage_size(s);
    SimplexGridConfig sc;
    sc.budget = 5000;
    sc.seed = rng();
    for (int m : {6, 12, 24, 48, 96, 192, 384, 768, 1000}) {
      sc.denominator = m;
      double lattice = 1.0;
      for (std::size_t k = 1; k < agents; ++k)
        lattice *= static_cast<double>(m - static_cast<int>(k)) / static_cast<double>(k);
      if (std::pow(lattice, static_cast<double>(sites)) >= 1000.0 || lattice >= 1000.0) break;
    }
    auto check = numeric_cross_check(problem, 0, sc);
    if (!check.all_passed()) {
      pass = false;
      detail = "trial " + std::to_string(trial) + ": " + check.to_string();
    }
  }
  if (pass) detail = std::to_string(instances) + " instances, closed form within 1e-10, lattice dominated";
  report(2, pass, detail);
}

// --- 3. one-step advantage sandwich ----------------------------------------

void criterion_3() {
  bool pass = true;
  std::string detail;

  struct Case {
    int horizon;
    double gamma_min, gamma_max;
  };
  const Case cases[] = {{1, 0.5, 2.0}, {2, 0.5, 2.0}, {3, 0.5, 2.0},
                        {2, 0.5, 0.5}, {2, 2.0, 2.0}, {3, 1.0, 1.0}};
  for (const Case& c : cases) {
    if (!pass) break;
    Problem problem;
    problem.tree = binomial_ptr(c.horizon, 0.6);
    problem.forward = ForwardGenerator::self_financing();
    problem.backward.assign(static_cast<std::size_t>(c.horizon),
                            BackwardGenerator::entropic_wealth(c.gamma_min, c.gamma_max));
    problem.terminal = TerminalGenerator::identity();

    std::vector<double> battery;
    for (double x = 1.0 - 12.0; x <= 1.0 + 12.0; x += 0.5) battery.push_back(x);
    auto est = estimate_K(problem.tree, problem.forward, problem.backward, battery);
    problem.controls =
        induced_control_sets(problem.tree, problem.forward, problem.backward, est.overall);

    GridConfig config;
    config.state_points = 65;
    config.control_resolution = 0.05;
    auto result = solve_backward(problem, 1.0, config);

    // Extend the advantage bound to every solved grid point before checking.
    std::vector<double> grid_battery = battery;
    for (const auto& vf : result.values)
      for (std::size_t i = 0; i < vf.node_count(); ++i) {
        grid_battery.push_back(vf.grid(i).front());
        grid_battery.push_back(vf.grid(i).back());
      }
    auto est2 = estimate_K(problem.tree, problem.forward, problem.backward, grid_battery);
    const double k_bound = std::max(est.overall, est2.overall);

    auto check = verify_k_bound(problem, result, k_bound);
    if (!check.all_passed()) {
      pass = false;
      detail = "horizon " + std::to_string(c.horizon) + ": " + check.to_string();
    }
  }

  // Symmetric market: identity value and no trading.
  if (pass) {
    for (int horizon : {1, 2, 3}) {
      Problem problem;
      problem.tree = binomial_ptr(horizon, 0.5);
      problem.forward = ForwardGenerator::self_financing();
      problem.backward.assign(static_cast<std::size_t>(horizon),
                              BackwardGenerator::entropic_wealth(1.0, 1.0));
      problem.terminal = TerminalGenerator::identity();
      std::vector<double> battery = {-1.0, 0.0, 1.0, 2.0};
      auto est = estimate_K(problem.tree, problem.forward, problem.backward, battery);
      problem.controls =
          induced_control_sets(problem.tree, problem.forward, problem.backward, est.overall);
      GridConfig config;
      config.state_points = 33;
      auto result = solve_backward(problem, 1.0, config);
      for (const auto& vf : result.values)
        for (std::size_t i = 0; i < vf.node_count(); ++i) {
          auto g = vf.grid(i);
          auto v = vf.values(i);
          for (std::size_t j = 0; j < g.size(); ++j)
            if (std::abs(v[j] - g[j]) > 1e-8) {
              pass = false;
              detail = "symmetric case: |y - x| = " + std::to_string(std::abs(v[j] - g[j]));
            }
        }
      auto traj = extract_policy(problem, result, 1.0, config);
      for (int id = 0; id < problem.tree->node_count(); ++id)
        for (double z : traj.control[static_cast<std::size_t>(id)])
          if (std::abs(z) > 1e-6) {
            pass = false;
            detail = "symmetric case: nonzero position " + std::to_string(z);
          }
      if (!pass) break;
    }
  }
  if (pass) detail = "sandwich holds at every grid point; symmetric case is the identity";
  report(3, pass, detail);
}

// --- 4. one-period optimum vs dense search ---------------------------------

void criterion_4() {
  const double theta_closed = 0.5 * std::log(1.5);           // 0.202733...
  const double gain_closed = -std::log(2.0 * std::sqrt(0.24));  // 0.020411...

  // Independent dense 1-D search over the one-step certainty equivalent.
  auto tree = binomial_ptr(1, 0.6);
  auto gain = [&](double theta) {
    return -std::log(0.6 * std::exp(-theta) + 0.4 * std::exp(theta));
  };
  double best_theta = 0.0, best_gain = -1.0;
  for (int i = -200000; i <= 200000; ++i) {
    const double theta = 1e-5 * i;
    const double g = gain(theta);
    if (g > best_gain) {
      best_gain = g;
      best_theta = theta;
    }
  }

  Problem problem;
  problem.tree = tree;
  problem.forward = ForwardGenerator::self_financing();
  problem.backward = {BackwardGenerator::entropic_wealth(1.0, 1.0)};
  problem.terminal = TerminalGenerator::identity();
  problem.controls = {ControlSetSpec::box(tree, 0, {-10.0}, {10.0})};
  GridConfig config;
  config.state_points = 33;
  config.control_resolution = 0.05;
  config.polish_tol = 1e-9;
  auto result = solve_backward(problem, 1.0, config);
  auto traj = extract_policy(problem, result, 1.0, config);
  const double theta_solver = traj.control[0][0];
  const double gain_solver = result.values[0](0, 1.0) - 1.0;

  const bool pass = std::abs(theta_solver - theta_closed) <= 1e-4 &&
                    std::abs(gain_solver - gain_closed) <= 1e-4 &&
                    std::abs(best_theta - theta_closed) <= 1e-4 &&
                    std::abs(best_gain - gain_closed) <= 1e-4;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "theta* solver %.6f vs closed %.6f vs dense %.6f; gain %.6f vs %.6f", theta_solver,
                theta_closed, best_theta, gain_solver, gain_closed);
  report(4, pass, buf);
}

// --- 5. risk-measure axioms ------------------------------------------------

void criterion_5() {
  Rng rng(5005);
  auto tree = binomial_ptr(2, 0.55);
  auto battery = random_scalar_battery(tree, 2, 100, rng, -2.0, 2.0);
  auto report_entries = check_axioms(ConditionalRiskMeasure::entropic(1.0), battery);
  bool pass = report_entries.all_passed();
  std::string detail = pass ? "100 randomized inputs, all axioms hold" : report_entries.to_string();

  // A second battery on a wider tree with per-node risk aversion.
  if (pass) {
    auto tri = std::make_shared<const ScenarioTree>(
        ScenarioTree::trinomial(2, {0.3, 0.3, 0.4}, {1.0, 0.0, -1.0}));
    Rng rng2(5006);
    auto battery2 = random_scalar_battery(tri, 2, 100, rng2, -3.0, 3.0);
    ConditionalValue::ScalarData gammas(tri->stage_size(1));
    for (std::size_t i = 0; i < gammas.size(); ++i) gammas[i] = 0.5 + 0.4 * static_cast<double>(i);
    auto rho = ConditionalRiskMeasure::entropic(ConditionalValue::scalars(tri, 1, std::move(gammas)));
    auto second = check_axioms(rho, battery2);
    if (!second.all_passed()) {
      pass = false;
      detail = second.to_string();
    }
  }
  report(5, pass, detail);
}

// --- 6. conditional-core axioms --------------------------------------------

void criterion_6() {
  Rng rng(6006);
  bool pass = true;
  std::string detail;
  int planted_flagged = 0;
  for (int trial = 0; trial < 100 && pass; ++trial) {
    auto tree = std::make_shared<const ScenarioTree>(random_tree(rng, 3, 3));
    const int stage = tree->horizon();
    auto values = random_scalar_battery(tree, stage, 6, rng);
    auto partitions = random_partitions(*tree, stage, 4, rng);

    // Metric axioms nodewise.
    const auto &x = values[0], &y = values[1], &z = values[2];
    if (!metric(x, x).equals(ConditionalValue::constant(tree, stage, 0.0))) {
      pass = false;
      detail = "d(x,x) != 0";
    }
    if (!metric(x, y).equals(metric(y, x))) {
      pass = false;
      detail = "asymmetric metric";
    }
    auto dxz = metric(x, z), dxy = metric(x, y), dyz = metric(y, z);
    for (std::size_t i = 0; i < dxz.size(); ++i)
      if (dxz.scalar(i) > dxy.scalar(i) + dyz.scalar(i) + 1e-12) {
        pass = false;
        detail = "triangle inequality violated";
      }

    // Concatenation existence/uniqueness and metric stability, exactly.
    for (const auto& partition : partitions) {
      std::vector<ConditionalValue> xs, ys;
      for (std::size_t k = 0; k < partition.block_count(); ++k) {
        xs.push_back(values[k % values.size()]);
        ys.push_back(values[(k + 3) % values.size()]);
      }
      auto px = concatenate(xs, partition);
      for (std::size_t i = 0; i < px.size(); ++i) {
        const int id = tree->atoms(stage)[i];
        const int block = partition.block_of(tree->ordinal(tree->ancestor(id, partition.stage())));
        if (px.scalar(i) != xs[static_cast<std::size_t>(block)].scalar(i)) {
          pass = false;
          detail = "concatenation does not agree blockwise";
        }
      }
      auto lhs = metric(px, concatenate(ys, partition));
      std::vector<ConditionalValue> dk;
      for (std::size_t k = 0; k < xs.size(); ++k) dk.push_back(metric(xs[k], ys[k]));
      if (!lhs.equals(concatenate(dk, partition))) {
        pass = false;
        detail = "metric not stable under pasting";
      }
    }

    // The planted non-stable map must be flagged in this trial.
    StableFn broadcast = [&](const ConditionalValue& v) {
      return ConditionalValue::constant(v.tree_ptr(), v.stage(), v.scalar(0));
    };
    bool multiblock = false;
    for (const auto& p : partitions)
      if (p.block_count() > 1) multiblock = true;
    if (multiblock && tree->stage_size(stage) > 1) {
      auto flags = check_stability(broadcast, values, partitions);
      if (flags.all_passed()) {
        pass = false;
        detail = "planted non-stable map slipped through at trial " + std::to_string(trial);
      } else {
        ++planted_flagged;
      }
    } else {
      ++planted_flagged;  // degenerate single-node stage: nothing to flag
    }
  }
  if (pass)
    detail = "100 randomized instances, axioms exact, planted map flagged in " +
             std::to_string(planted_flagged) + " trials";
  report(6, pass, detail);
}

// --- 7. set-valued correspondences -----------------------------------------

void criterion_7() {
  const auto start = std::chrono::steady_clock::now();
  auto suite = reciprocality_suite(7007, 100);
  const double elapsed = seconds_since(start);
  bool pass = suite.all_passed() && elapsed < 30.0;
  std::string detail = pass ? suite.entries.front().label + "; randomized 100; " +
                                  std::to_string(elapsed) + "s"
                            : suite.to_string();
  report(7, pass, detail);
}

// --- 8. grid-refinement consistency ----------------------------------------

void criterion_8() {
  const char* cfg = R"({
    "preset": "risk-constrained-consumption",
    "seed": 42,
    "grid": {"state_points": 17, "control_resolution": 0.4, "polish_tol": 1e-8}
  })";
  auto built = build_from_text(cfg);
  auto diag = refinement_study(*built.problem, built.x0, built.grid, 2);
  bool pass = diag.deltas.size() == 2 && diag.ratio >= 3.0;
  char buf[200];
  std::snprintf(buf, sizeof(buf), "deltas %.3g -> %.3g, ratio %.2f", diag.deltas[0],
                diag.deltas[1], diag.ratio);
  std::string detail = buf;

  // The solve subcommand documents the same diagnostic in its summary.
  if (pass) {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "treedp_acceptance_solve";
    fs::remove_all(dir);
    const auto cfg_path = fs::temp_directory_path() / "treedp_acceptance.json";
    std::ofstream(cfg_path, std::ios::binary) << cfg;
    std::ostringstream sink;
    SolveOptions options;
    options.refinement_levels = 2;
    if (run_solve(cfg_path.string(), dir.string(), {}, options, sink) != kExitOk) {
      pass = false;
      detail += "; solve subcommand failed";
    } else {
      std::ifstream summary(dir / "summary.txt");
      std::stringstream text;
      text << summary.rdbuf();
      if (text.str().find("refinement_ratio") == std::string::npos) {
        pass = false;
        detail += "; summary lacks the refinement diagnostic";
      }
    }
  }
  report(8, pass, detail);
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  if (g_failures == 0)
    std::printf("acceptance: all 8 criteria passed\n");
  else
    std::printf("acceptance: %d criterion(s) failed\n", g_failures);
  return g_failures;
}

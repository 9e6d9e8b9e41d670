#include <doctest.h>

#include <cmath>

#include "treedp/battery.hpp"
#include "treedp/errors.hpp"
#include "treedp/generators.hpp"

using namespace treedp;

namespace {

TreePtr binomial_ptr(int horizon, double p) {
  return std::make_shared<const ScenarioTree>(ScenarioTree::binomial(horizon, p));
}

Problem wealth_entropic_problem(TreePtr tree, double gamma_min, double gamma_max, double box) {
  Problem problem;
  problem.tree = tree;
  problem.forward = ForwardGenerator::self_financing();
  problem.backward.assign(static_cast<std::size_t>(tree->horizon()),
                          BackwardGenerator::entropic_wealth(gamma_min, gamma_max));
  problem.terminal = TerminalGenerator::identity();
  for (int t = 0; t < tree->horizon(); ++t)
    problem.controls.push_back(ControlSetSpec::box(tree, t, {-box}, {box}));
  return problem;
}

}  // namespace

TEST_SUITE("generators") {
  TEST_CASE("wealth dynamics per child") {
    auto tree = binomial_ptr(1, 0.6);
    auto fwd = ForwardGenerator::wealth_consumption();

    SUBCASE("zero control is the identity, exactly") {
      const double z[] = {0.0, 0.0};
      for (int c : tree->node(0).children) CHECK(fwd.step(*tree, c, 1.37, z) == 1.37);
    }
    SUBCASE("unit investment splits into (2, 0)") {
      const double z[] = {1.0, 0.0};
      auto children = tree->node(0).children;
      CHECK(fwd.step(*tree, children[0], 1.0, z) == 2.0);
      CHECK(fwd.step(*tree, children[1], 1.0, z) == 0.0);
    }
    SUBCASE("consumption is subtracted") {
      const double z[] = {0.0, 0.25};
      CHECK(fwd.step(*tree, tree->node(0).children[0], 1.0, z) == 0.75);
    }
    SUBCASE("lifted evaluation matches the per-child steps") {
      auto x = ConditionalValue::constant(tree, 0, 1.0);
      auto z = ConditionalValue::vectors(tree, 0, {{1.0, 0.0}});
      auto next = fwd.evaluate(x, z);
      CHECK(next.scalar(0) == 2.0);
      CHECK(next.scalar(1) == 0.0);
    }
  }

  TEST_CASE("affine dynamics are exactly concave in the control") {
    auto tree = binomial_ptr(1, 0.5);
    auto fwd = ForwardGenerator::self_financing();
    const double za[] = {0.8};
    const double zb[] = {-0.4};
    const double lam = 0.3;
    const double zm[] = {lam * za[0] + (1 - lam) * zb[0]};
    for (int c : tree->node(0).children) {
      const double mix = fwd.step(*tree, c, 1.0, zm);
      const double bound = lam * fwd.step(*tree, c, 1.0, za) + (1 - lam) * fwd.step(*tree, c, 1.0, zb);
      CHECK(mix == doctest::Approx(bound).epsilon(1e-15));
    }
  }

  TEST_CASE("portfolio identity and missing shocks") {
    auto tree = binomial_ptr(1, 0.5);
    const double z[] = {0.7};
    CHECK(ForwardGenerator::portfolio_identity().step(*tree, 1, 5.0, z) == 0.7);

    // A tree without shock data cannot drive wealth dynamics.
    using NI = ScenarioTree::NodeInput;
    auto bare = std::make_shared<const ScenarioTree>(
        ScenarioTree(1, {NI{-1, 1.0, {}}, NI{0, 0.5, {}}, NI{0, 0.5, {}}}));
    const double z2[] = {1.0};
    CHECK_THROWS_AS(ForwardGenerator::self_financing().step(*bare, 1, 1.0, z2), ConfigError);
  }

  TEST_CASE("entropic aggregator") {
    auto tree = binomial_ptr(1, 0.5);
    auto u = BackwardGenerator::entropic_wealth(1.0, 1.0);

    SUBCASE("constants pass through") {
      std::vector<double> y = {0.8, 0.8};
      CHECK(u.aggregate(*tree, 0, 1.0, y, {}) == doctest::Approx(0.8).epsilon(1e-14));
    }
    SUBCASE("frozen certainty equivalent") {
      std::vector<double> y = {0.0, -1.0};
      CHECK(u.aggregate(*tree, 0, 1.0, y, {}) ==
            doctest::Approx(-0.6201145069582775).epsilon(1e-14));
    }
    SUBCASE("a -inf child dominates") {
      std::vector<double> y = {0.0, -std::numeric_limits<double>::infinity()};
      CHECK(std::isinf(u.aggregate(*tree, 0, 1.0, y, {})));
    }
    SUBCASE("+inf continuation is outside the codomain") {
      std::vector<double> y = {std::numeric_limits<double>::infinity(), 0.0};
      CHECK_THROWS_AS(u.aggregate(*tree, 0, 1.0, y, {}), ConfigError);
    }
  }

  TEST_CASE("risk aversion profile is decreasing and bounded") {
    auto u = BackwardGenerator::entropic_wealth(0.5, 2.0);
    CHECK(u.gamma_at(0.0) == 2.0);
    CHECK(u.gamma_at(-5.0) == 2.0);  // clamped below zero wealth
    CHECK(u.gamma_at(1.0) == doctest::Approx(0.5 + 1.5 / 2.0));
    CHECK(u.gamma_at(1e9) == doctest::Approx(0.5).epsilon(1e-6));
    double prev = u.gamma_at(0.0);
    for (double x = 0.25; x < 10.0; x += 0.25) {
      CHECK(u.gamma_at(x) <= prev + 1e-15);
      prev = u.gamma_at(x);
    }
  }

  TEST_CASE("scaling family is jointly monotone") {
    auto tree = binomial_ptr(1, 0.5);
    auto u = BackwardGenerator::scaling_entropic();
    Rng rng(31);
    std::uniform_real_distribution<double> xs(0.2, 3.0), ys(-1.0, 2.0), bumps(0.0, 1.0);
    for (int k = 0; k < 200; ++k) {
      const double x1 = xs(rng), dx = bumps(rng);
      std::vector<double> y1 = {ys(rng), ys(rng)};
      std::vector<double> y2 = {y1[0] + bumps(rng), y1[1] + bumps(rng)};
      const double lo = u.aggregate(*tree, 0, x1, y1, {});
      const double hi = u.aggregate(*tree, 0, x1 + dx, y2, {});
      CHECK(hi >= lo - 1e-10);
    }
    CHECK_THROWS_AS(u.aggregate(*tree, 0, -1.0, std::vector<double>{0.0, 0.0}, {}), ConfigError);
  }

  TEST_CASE("condition battery passes for the wealth-entropic family") {
    auto tree = binomial_ptr(2, 0.6);
    auto problem = wealth_entropic_problem(tree, 0.5, 2.0, 3.0);
    GeneratorCheckConfig cfg;
    cfg.trials = 16;
    cfg.seed = 5;
    cfg.monotone_regime = true;
    auto report = check_generator_conditions(problem, cfg);
    INFO(report.to_string());
    CHECK(report.all_passed());
  }

  TEST_CASE("one-step advantage bound") {
    SUBCASE("symmetric shocks give a vanishing bound") {
      auto tree = binomial_ptr(2, 0.5);
      auto problem = wealth_entropic_problem(tree, 1.0, 1.0, 3.0);
      std::vector<double> battery = {0.5, 1.0, 2.0};
      const auto est = estimate_K(tree, problem.forward, problem.backward, battery);
      CHECK(est.overall >= 0.0);
      CHECK(est.overall <= 1e-9);
    }
    SUBCASE("frozen stationary value for the 60/40 tree") {
      auto tree = binomial_ptr(1, 0.6);
      auto problem = wealth_entropic_problem(tree, 1.0, 1.0, 3.0);
      std::vector<double> battery = {1.0};
      const auto est = estimate_K(tree, problem.forward, problem.backward, battery);
      CHECK(est.overall == doctest::Approx(0.020410997260127607).epsilon(1e-6));
    }
    SUBCASE("a sure gain has no finite bound") {
      // Strictly positive shocks: scaling up the position only helps.
      auto tree = std::make_shared<const ScenarioTree>(ScenarioTree::binomial(1, 0.5, 2.0, 1.0));
      auto problem = wealth_entropic_problem(tree, 1.0, 1.0, 3.0);
      std::vector<double> battery = {1.0};
      CHECK_THROWS_AS(estimate_K(tree, problem.forward, problem.backward, battery),
                      DivergenceError);
    }
    SUBCASE("an unbounded additive reward has no finite bound") {
      auto tree = binomial_ptr(1, 0.5);
      Problem problem;
      problem.tree = tree;
      problem.forward = ForwardGenerator::self_financing();
      problem.backward = {BackwardGenerator::additive(
          [](const ScenarioTree&, int, double, std::span<const double> z) {
            return z.empty() ? 0.0 : 10.0 * std::abs(z[0]);
          })};
      problem.terminal = TerminalGenerator::identity();
      problem.controls.push_back(ControlSetSpec::box(tree, 0, {-1.0}, {1.0}));
      std::vector<double> battery = {1.0};
      CHECK_THROWS_AS(estimate_K(tree, problem.forward, problem.backward, battery),
                      DivergenceError);
    }
  }

  TEST_CASE("induced level sets contain the anchor and stay bounded") {
    auto tree = binomial_ptr(2, 0.6);
    auto problem = wealth_entropic_problem(tree, 0.5, 2.0, 3.0);
    std::vector<double> battery = {0.0, 0.5, 1.0, 2.0, 4.0};
    const auto est = estimate_K(tree, problem.forward, problem.backward, battery);
    auto sets = induced_control_sets(tree, problem.forward, problem.backward, est.overall);
    REQUIRE(sets.size() == 2);
    for (int t = 0; t < 2; ++t) {
      for (std::size_t i = 0; i < tree->stage_size(t); ++i) {
        const double zero[] = {0.0};
        CHECK(sets[static_cast<std::size_t>(t)].feasible(i, 1.0, zero));
        CHECK(std::isfinite(sets[static_cast<std::size_t>(t)].bounding_radius(i, 1.0)));
      }
    }
  }

  TEST_CASE("problem validation") {
    auto tree = binomial_ptr(2, 0.5);
    Problem problem;
    problem.tree = tree;
    problem.forward = ForwardGenerator::self_financing();
    problem.backward = {BackwardGenerator::entropic_wealth(1.0, 1.0)};  // one short
    problem.terminal = TerminalGenerator::identity();
    problem.controls.push_back(ControlSetSpec::box(tree, 0, {-1.0}, {1.0}));
    CHECK_THROWS_AS(problem.validate(), ConfigError);
  }
}

#include <doctest.h>

#include <cmath>

#include "treedp/battery.hpp"
#include "treedp/errors.hpp"
#include "treedp/risk.hpp"

using namespace treedp;

namespace {

TreePtr binomial_ptr(int horizon, double p) {
  return std::make_shared<const ScenarioTree>(ScenarioTree::binomial(horizon, p));
}

}  // namespace

TEST_SUITE("risk") {
  TEST_CASE("entropic evaluation") {
    auto tree = binomial_ptr(1, 0.5);
    auto rho = ConditionalRiskMeasure::entropic(1.0);

    SUBCASE("normalized at zero, exactly") {
      auto zero = ConditionalValue::constant(tree, 1, 0.0);
      CHECK(rho.evaluate(zero).scalar(0) == 0.0);
    }
    SUBCASE("frozen log-mean-exp value") {
      // log(0.5 + 0.5 e) for children (0, -1) with equal weights.
      auto x = ConditionalValue::scalars(tree, 1, {0.0, -1.0});
      CHECK(rho.evaluate(x).scalar(0) ==
            doctest::Approx(0.6201145069582775).epsilon(1e-14));
    }
    SUBCASE("translation invariance") {
      auto x = ConditionalValue::scalars(tree, 1, {0.7, -0.3});
      auto shifted = x.map_scalars([](double v) { return v + 1.25; });
      CHECK(rho.evaluate(shifted).scalar(0) ==
            doctest::Approx(rho.evaluate(x).scalar(0) - 1.25).epsilon(1e-12));
    }
    SUBCASE("stabilized against large arguments") {
      auto x = ConditionalValue::scalars(tree, 1, {-800.0, 500.0});
      const double v = rho.evaluate(x).scalar(0);
      CHECK(std::isfinite(v));
      CHECK(v == doctest::Approx(800.0 + std::log(0.5)).epsilon(1e-10));
    }
  }

  TEST_CASE("negative expectation and per-node risk aversion") {
    auto tree = binomial_ptr(1, 0.6);
    auto x = ConditionalValue::scalars(tree, 1, {10.0, 0.0});
    CHECK(ConditionalRiskMeasure::negative_expectation().evaluate(x).scalar(0) ==
          doctest::Approx(-6.0).epsilon(1e-15));

    auto gamma = ConditionalValue::constant(tree, 0, 2.0);
    auto rho = ConditionalRiskMeasure::entropic(gamma);
    CHECK(rho.gamma_at(*tree, 0) == 2.0);
    CHECK(std::isfinite(rho.evaluate(x).scalar(0)));
  }

  TEST_CASE("axiom battery passes for the entropic measure") {
    auto tree = binomial_ptr(2, 0.55);
    Rng rng(99);
    auto battery = random_scalar_battery(tree, 2, 40, rng);
    auto report = check_axioms(ConditionalRiskMeasure::entropic(0.8), battery);
    INFO(report.to_string());
    CHECK(report.all_passed());
  }

  TEST_CASE("a nonmonotone map is flagged") {
    auto tree = binomial_ptr(1, 0.5);
    auto bad = ConditionalRiskMeasure::custom(
        [](const ScenarioTree& tr, int node_id, std::span<const double> child_values) {
          const TreeNode& n = tr.node(node_id);
          double s = 0.0;
          for (std::size_t j = 0; j < child_values.size(); ++j)
            s += tr.node(n.children[j]).edge_prob * child_values[j] * child_values[j];
          return -s;
        });
    Rng rng(17);
    auto battery = random_scalar_battery(tree, 1, 40, rng);
    auto report = check_axioms(bad, battery);
    bool monotonicity_failed = false;
    for (const auto& e : report.entries)
      if (e.label == "monotonicity" && !e.passed) monotonicity_failed = true;
    CHECK(monotonicity_failed);
  }

  TEST_CASE("sensitivity scan exceeds the threshold via doubling") {
    auto tree = binomial_ptr(1, 0.5);
    auto rho = ConditionalRiskMeasure::entropic(1.0);
    auto y = ConditionalValue::scalars(tree, 1, {1.0, -0.02});
    bool exceeded = false;
    for (int j = 0; j <= 60 && !exceeded; ++j) {
      auto scaled = y.map_scalars([j](double v) { return std::ldexp(v, j); });
      if (rho.evaluate(scaled).scalar(0) >= 1e6) exceeded = true;
    }
    CHECK(exceeded);
  }

  TEST_CASE("rejects nonpositive risk aversion") {
    CHECK_THROWS_AS(ConditionalRiskMeasure::entropic(0.0), ConfigError);
    CHECK_THROWS_AS(ConditionalRiskMeasure::entropic(-1.0), ConfigError);
  }
}

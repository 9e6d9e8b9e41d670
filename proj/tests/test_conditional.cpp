#include <doctest.h>

#include <cmath>

#include "treedp/battery.hpp"
#include "treedp/conditional.hpp"
#include "treedp/errors.hpp"
#include "treedp/extended.hpp"
#include "treedp/risk.hpp"

using namespace treedp;

namespace {

TreePtr binomial_ptr(int horizon, double p) {
  return std::make_shared<const ScenarioTree>(ScenarioTree::binomial(horizon, p));
}

}  // namespace

TEST_SUITE("conditional") {
  TEST_CASE("concatenation pastes blockwise") {
    auto tree = binomial_ptr(1, 0.5);
    auto x = ConditionalValue::scalars(tree, 1, {5, 7});
    auto y = ConditionalValue::scalars(tree, 1, {9, 3});

    SUBCASE("single block returns the part") {
      auto whole = StagePartition::whole(*tree, 1);
      std::vector<ConditionalValue> parts = {x};
      CHECK(concatenate(parts, whole).equals(x));
    }
    SUBCASE("pointwise paste") {
      auto singles = StagePartition::singletons(*tree, 1);
      std::vector<ConditionalValue> parts = {x, y};
      auto pasted = concatenate(parts, singles);
      CHECK(pasted.scalar(0) == 5.0);
      CHECK(pasted.scalar(1) == 3.0);
    }
    SUBCASE("uniqueness: agreement blockwise pins the element") {
      auto singles = StagePartition::singletons(*tree, 1);
      std::vector<ConditionalValue> parts = {x, y};
      auto a = concatenate(parts, singles);
      auto b = concatenate(parts, singles);
      CHECK(a.equals(b));
      CHECK(metric(a, x).scalar(0) == 0.0);
      CHECK(metric(a, y).scalar(1) == 0.0);
    }
  }

  TEST_CASE("metric axioms nodewise") {
    auto tree = binomial_ptr(1, 0.5);

    SUBCASE("frozen scalar example") {
      auto x = ConditionalValue::scalars(tree, 1, {1, 4});
      auto y = ConditionalValue::scalars(tree, 1, {3, 1});
      auto d = metric(x, y);
      CHECK(d.scalar(0) == 2.0);
      CHECK(d.scalar(1) == 3.0);
    }
    SUBCASE("discrete metric on integers") {
      auto x = ConditionalValue::integers(tree, 1, {2, 2});
      auto y = ConditionalValue::integers(tree, 1, {2, 5});
      auto d = metric(x, y);
      CHECK(d.scalar(0) == 0.0);
      CHECK(d.scalar(1) == 1.0);
    }
    SUBCASE("identity, symmetry, triangle on random values") {
      Rng rng(7);
      auto battery = random_scalar_battery(tree, 1, 30, rng);
      for (std::size_t k = 0; k + 2 < battery.size(); k += 3) {
        const auto &x = battery[k], &y = battery[k + 1], &z = battery[k + 2];
        CHECK(metric(x, x).scalar(0) == 0.0);
        CHECK(metric(x, y).equals(metric(y, x)));
        auto dxz = metric(x, z), dxy = metric(x, y), dyz = metric(y, z);
        for (std::size_t i = 0; i < dxz.size(); ++i)
          CHECK(dxz.scalar(i) <= dxy.scalar(i) + dyz.scalar(i) + 1e-12);
      }
    }
    SUBCASE("vector payloads use the euclidean distance") {
      auto x = ConditionalValue::vectors(tree, 1, {{3.0, 0.0}, {1.0}});
      auto y = ConditionalValue::vectors(tree, 1, {{0.0, 4.0}, {1.0}});
      auto d = metric(x, y);
      CHECK(d.scalar(0) == doctest::Approx(5.0).epsilon(1e-15));
      CHECK(d.scalar(1) == 0.0);
    }
  }

  TEST_CASE("metric is stable under pasting, exactly") {
    auto tree = binomial_ptr(2, 0.4);
    Rng rng(11);
    auto battery = random_scalar_battery(tree, 2, 20, rng);
    auto partitions = random_partitions(*tree, 2, 10, rng);
    for (const auto& partition : partitions) {
      std::vector<ConditionalValue> xs, ys;
      for (std::size_t k = 0; k < partition.block_count(); ++k) {
        xs.push_back(battery[k % battery.size()]);
        ys.push_back(battery[(k + 5) % battery.size()]);
      }
      auto lhs = metric(concatenate(xs, partition), concatenate(ys, partition));
      std::vector<ConditionalValue> dk;
      for (std::size_t k = 0; k < xs.size(); ++k) dk.push_back(metric(xs[k], ys[k]));
      auto rhs = concatenate(dk, partition);
      CHECK(lhs.equals(rhs));  // exact
    }
  }

  TEST_CASE("essential sup and inf") {
    auto tree = binomial_ptr(1, 0.5);
    auto x = ConditionalValue::scalars(tree, 1, {1, 5});
    auto y = ConditionalValue::scalars(tree, 1, {4, 2});

    std::vector<ConditionalValue> single = {x};
    CHECK(essential_sup(single).equals(x));

    std::vector<ConditionalValue> both = {x, y};
    auto s = essential_sup(both);
    CHECK(s.scalar(0) == 4.0);
    CHECK(s.scalar(1) == 5.0);
    auto i = essential_inf(both);
    CHECK(i.scalar(0) == 1.0);
    CHECK(i.scalar(1) == 2.0);

    auto top = ConditionalValue::scalars(tree, 1, {ext::kPosInf, 0.0});
    std::vector<ConditionalValue> with_inf = {x, top};
    CHECK(ext::is_pos_inf(essential_sup(with_inf).scalar(0)));

    std::vector<ConditionalValue> empty;
    CHECK_THROWS_AS(essential_sup(empty), ConfigError);
  }

  TEST_CASE("conditional expectation") {
    auto tree = binomial_ptr(2, 0.6);

    SUBCASE("constants are invariant") {
      auto c = ConditionalValue::constant(tree, 2, 3.25);
      auto e = conditional_expectation(c, 0);
      CHECK(e.scalar(0) == doctest::Approx(3.25).epsilon(1e-15));
    }
    SUBCASE("hand expectation") {
      auto x = ConditionalValue::scalars(tree, 1, {10, 0});
      CHECK(conditional_expectation(x, 0).scalar(0) == doctest::Approx(6.0).epsilon(1e-15));
    }
    SUBCASE("tower property on random trees") {
      Rng rng(5);
      for (int trial = 0; trial < 10; ++trial) {
        auto rt = std::make_shared<const ScenarioTree>(random_tree(rng, 3, 3));
        if (rt->horizon() < 2) continue;
        auto x = random_scalar_battery(rt, rt->horizon(), 1, rng).front();
        auto direct = conditional_expectation(x, 0);
        auto nested = conditional_expectation(conditional_expectation(x, 1), 0);
        CHECK(std::abs(direct.scalar(0) - nested.scalar(0)) <= 1e-12);
      }
    }
    SUBCASE("rejects infinite payloads and bad stages") {
      auto bad = ConditionalValue::scalars(tree, 1, {ext::kNegInf, 0.0});
      CHECK_THROWS_AS(conditional_expectation(bad, 0), ConfigError);
      auto x = ConditionalValue::constant(tree, 1, 1.0);
      CHECK_THROWS_AS(conditional_expectation(x, 2), ConfigError);
    }
  }

  TEST_CASE("measurable subsequence selection is nodewise lookup") {
    auto tree = binomial_ptr(1, 0.5);
    std::vector<ConditionalValue> seq = {
        ConditionalValue::scalars(tree, 1, {10, 11}),
        ConditionalValue::scalars(tree, 1, {20, 21}),
        ConditionalValue::scalars(tree, 1, {30, 31}),
    };
    auto idx = ConditionalValue::integers(tree, 1, {2, 0});
    auto picked = select_subsequence(seq, idx);
    CHECK(picked.scalar(0) == 30.0);
    CHECK(picked.scalar(1) == 11.0);

    auto oob = ConditionalValue::integers(tree, 1, {3, 0});
    CHECK_THROWS_AS(select_subsequence(seq, oob), ConfigError);
  }

  TEST_CASE("stability harness") {
    auto tree = binomial_ptr(2, 0.5);
    Rng rng(13);
    auto battery = random_scalar_battery(tree, 2, 16, rng);
    auto partitions = random_partitions(*tree, 2, 8, rng);

    SUBCASE("nodewise maps are stable") {
      StableFn square = [](const ConditionalValue& v) {
        return v.map_scalars([](double s) { return s * s; });
      };
      CHECK(check_stability(square, battery, partitions).all_passed());
    }
    SUBCASE("a non-local map is flagged") {
      StableFn broadcast = [&](const ConditionalValue& v) {
        return ConditionalValue::constant(v.tree_ptr(), v.stage(), v.scalar(0));
      };
      auto report = check_stability(broadcast, battery, partitions);
      CHECK_FALSE(report.all_passed());
      // Every partition with more than one block must expose the violation.
      std::size_t multiblock = 0;
      for (const auto& p : partitions)
        if (p.block_count() > 1) ++multiblock;
      CHECK(report.failure_count() >= multiblock);
    }
    SUBCASE("the entropic risk measure is stable") {
      auto rho = ConditionalRiskMeasure::entropic(1.3);
      StableFn eval = [&](const ConditionalValue& v) { return rho.evaluate(v); };
      auto parts = random_partitions(*tree, 1, 8, rng);
      CHECK(check_stability(eval, battery, parts).all_passed());
    }
    SUBCASE("evaluation failures surface as diagnostics") {
      StableFn broken = [](const ConditionalValue&) -> ConditionalValue {
        throw Error("boom");
      };
      auto report = check_stability(broken, battery, partitions);
      CHECK_FALSE(report.all_passed());
      CHECK(report.entries.front().witness.find("evaluation failure") != std::string::npos);
    }
  }

  TEST_CASE("payload validation") {
    auto tree = binomial_ptr(1, 0.5);
    CHECK_THROWS_AS(ConditionalValue::scalars(tree, 1, {1.0}), ConfigError);
    CHECK_THROWS_AS(ConditionalValue::scalars(tree, 1, {std::nan(""), 0.0}), ConfigError);
    CHECK_THROWS_AS(ConditionalValue::vectors(tree, 1, {{1.0}, {ext::kPosInf}}), ConfigError);
  }
}

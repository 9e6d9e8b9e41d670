#pragma once

#include <random>
#include <vector>

#include "treedp/conditional.hpp"
#include "treedp/scenario_tree.hpp"

// Seeded random inputs for the property checkers. Everything here is
// deterministic given the generator state.

namespace treedp {

using Rng = std::mt19937_64;

std::vector<ConditionalValue> random_scalar_battery(const TreePtr& tree, int stage,
                                                    std::size_t count, Rng& rng, double lo = -2.0,
                                                    double hi = 2.0);

std::vector<ConditionalValue> random_vector_battery(const TreePtr& tree, int stage,
                                                    std::size_t dim, std::size_t count, Rng& rng,
                                                    double lo = -2.0, double hi = 2.0);

std::vector<StagePartition> random_partitions(const ScenarioTree& tree, int stage,
                                              std::size_t count, Rng& rng);

/// Random tree: horizon in [1, max_horizon], per-node branching in
/// [1, max_children], scalar shocks taking both signs.
ScenarioTree random_tree(Rng& rng, int max_horizon, int max_children);

}  // namespace treedp

#include "treedp/battery.hpp"

namespace treedp {

std::vector<ConditionalValue> random_scalar_battery(const TreePtr& tree, int stage,
                                                    std::size_t count, Rng& rng, double lo,
                                                    double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<ConditionalValue> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    ConditionalValue::ScalarData values(tree->stage_size(stage));
    for (double& v : values) v = dist(rng);
    out.push_back(ConditionalValue::scalars(tree, stage, std::move(values)));
  }
  return out;
}

std::vector<ConditionalValue> random_vector_battery(const TreePtr& tree, int stage,
                                                    std::size_t dim, std::size_t count, Rng& rng,
                                                    double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<ConditionalValue> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    ConditionalValue::VectorData values(tree->stage_size(stage));
    for (auto& v : values) {
      v.resize(dim);
      for (double& x : v) x = dist(rng);
    }
    out.push_back(ConditionalValue::vectors(tree, stage, std::move(values)));
  }
  return out;
}

std::vector<StagePartition> random_partitions(const ScenarioTree& tree, int stage,
                                              std::size_t count, Rng& rng) {
  const std::size_t n = tree.stage_size(stage);
  std::vector<StagePartition> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t blocks = 1 + rng() % n;
    std::vector<int> assign(n);
    // Guarantee every block is hit, then fill the rest uniformly.
    for (std::size_t b = 0; b < blocks; ++b) assign[b] = static_cast<int>(b);
    for (std::size_t i = blocks; i < n; ++i) assign[i] = static_cast<int>(rng() % blocks);
    std::shuffle(assign.begin(), assign.end(), rng);
    out.emplace_back(tree, stage, std::move(assign));
  }
  return out;
}

ScenarioTree random_tree(Rng& rng, int max_horizon, int max_children) {
  const int horizon = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_horizon));
  std::uniform_real_distribution<double> shock_dist(0.3, 1.5);
  std::vector<ScenarioTree::NodeInput> inputs;
  inputs.push_back({});
  std::vector<int> frontier = {0};
  int next_id = 1;
  for (int t = 0; t < horizon; ++t) {
    std::vector<int> next;
    for (int parent : frontier) {
      const int k = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_children));
      std::vector<double> weights(static_cast<std::size_t>(k));
      double total = 0.0;
      for (double& w : weights) {
        w = 0.2 + static_cast<double>(rng() % 1000) / 1000.0;
        total += w;
      }
      for (int j = 0; j < k; ++j) {
        // Shocks alternate in sign so wealth dynamics see both directions.
        const double mag = shock_dist(rng);
        const double shock = (j % 2 == 0) ? mag : -mag;
        inputs.push_back({parent, weights[static_cast<std::size_t>(j)] / total, {shock}});
        next.push_back(next_id++);
      }
    }
    frontier = std::move(next);
  }
  return ScenarioTree(horizon, std::move(inputs));
}

}  // namespace treedp

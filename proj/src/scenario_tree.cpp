#include "treedp/scenario_tree.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "treedp/errors.hpp"

namespace treedp {

namespace {
constexpr double kProbTol = 1e-12;

std::string node_str(int id) { return "node " + std::to_string(id); }
}  // namespace

ScenarioTree::ScenarioTree(int horizon, std::vector<NodeInput> inputs) : horizon_(horizon) {
  if (horizon < 1) throw ConfigError("scenario tree horizon must be >= 1");
  if (inputs.empty()) throw ConfigError("scenario tree needs at least a root node");

  nodes_.resize(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    TreeNode& n = nodes_[i];
    n.id = static_cast<int>(i);
    n.parent = inputs[i].parent;
    n.edge_prob = inputs[i].prob;
    n.shock = std::move(inputs[i].shock);
    if (n.parent < 0) {
      if (n.id != 0) throw ConfigError("root must be the first node; " + node_str(n.id) + " has no parent");
      n.stage = 0;
      n.edge_prob = 1.0;
    } else {
      if (n.parent >= n.id)
        throw ConfigError(node_str(n.id) + ": parent ids must precede children (breadth-first order)");
      n.stage = nodes_[static_cast<std::size_t>(n.parent)].stage + 1;
      nodes_[static_cast<std::size_t>(n.parent)].children.push_back(n.id);
    }
  }

  stage_nodes_.assign(static_cast<std::size_t>(horizon_) + 1, {});
  ordinals_.resize(nodes_.size());
  path_prob_.resize(nodes_.size());
  for (const TreeNode& n : nodes_) {
    if (n.stage > horizon_) throw ConfigError(node_str(n.id) + " is deeper than the horizon");
    ordinals_[static_cast<std::size_t>(n.id)] = stage_nodes_[static_cast<std::size_t>(n.stage)].size();
    stage_nodes_[static_cast<std::size_t>(n.stage)].push_back(n.id);
    path_prob_[static_cast<std::size_t>(n.id)] =
        n.parent < 0 ? 1.0 : path_prob_[static_cast<std::size_t>(n.parent)] * n.edge_prob;
  }
  validate();
}

void ScenarioTree::validate() const {
  if (stage_nodes_[0].size() != 1) throw ConfigError("exactly one root node required");
  for (const TreeNode& n : nodes_) {
    if (!(n.edge_prob > 0.0) || n.edge_prob > 1.0)
      throw ConfigError(node_str(n.id) + ": edge probability must lie in (0,1], got " +
                        std::to_string(n.edge_prob));
    if (n.stage < horizon_ && n.children.empty())
      throw ConfigError(node_str(n.id) + " at stage " + std::to_string(n.stage) +
                        " is a leaf before the horizon");
    if (n.stage == horizon_ && !n.children.empty())
      throw ConfigError(node_str(n.id) + " has children beyond the horizon");
    if (!n.children.empty()) {
      double sum = 0.0;
      for (int c : n.children) sum += node(c).edge_prob;
      if (std::abs(sum - 1.0) > kProbTol)
        throw ConfigError(node_str(n.id) + ": child probabilities sum to " + std::to_string(sum));
    }
    if (!(path_prob_[static_cast<std::size_t>(n.id)] > 0.0))
      throw ConfigError(node_str(n.id) + " has zero path probability");
  }
}

ScenarioTree ScenarioTree::from_stage_branching(
    const std::vector<std::vector<BranchSpec>>& branches_per_stage) {
  const int horizon = static_cast<int>(branches_per_stage.size());
  std::vector<NodeInput> inputs;
  inputs.push_back({});  // root
  std::vector<int> frontier = {0};
  int next_id = 1;
  for (int t = 0; t < horizon; ++t) {
    const auto& branches = branches_per_stage[static_cast<std::size_t>(t)];
    if (branches.empty()) throw ConfigError("stage " + std::to_string(t) + " has no branches");
    std::vector<int> next;
    for (int parent : frontier) {
      for (const BranchSpec& b : branches) {
        inputs.push_back({parent, b.prob, b.shock});
        next.push_back(next_id++);
      }
    }
    frontier = std::move(next);
  }
  return ScenarioTree(horizon, std::move(inputs));
}

ScenarioTree ScenarioTree::binomial(int horizon, double p_up, double up_shock, double down_shock) {
  std::vector<std::vector<BranchSpec>> stages(
      static_cast<std::size_t>(horizon),
      {{p_up, {up_shock}}, {1.0 - p_up, {down_shock}}});
  return from_stage_branching(stages);
}

ScenarioTree ScenarioTree::trinomial(int horizon, const std::vector<double>& probs,
                                     const std::vector<double>& shocks) {
  if (probs.size() != 3 || shocks.size() != 3)
    throw ConfigError("trinomial template needs 3 probabilities and 3 shocks");
  std::vector<BranchSpec> branches;
  for (std::size_t i = 0; i < 3; ++i) branches.push_back({probs[i], {shocks[i]}});
  return from_stage_branching(std::vector<std::vector<BranchSpec>>(
      static_cast<std::size_t>(horizon), branches));
}

std::span<const int> ScenarioTree::atoms(int stage) const {
  if (stage < 0 || stage > horizon_)
    throw ConfigError("stage " + std::to_string(stage) + " out of range [0," +
                      std::to_string(horizon_) + "]");
  return stage_nodes_[static_cast<std::size_t>(stage)];
}

int ScenarioTree::ancestor(int id, int stage) const {
  const TreeNode* n = &node(id);
  if (stage < 0 || stage > n->stage)
    throw ConfigError("ancestor stage " + std::to_string(stage) + " out of range for " + node_str(id));
  while (n->stage > stage) n = &node(n->parent);
  return n->id;
}

std::vector<double> ScenarioTree::conditional_probability(int id, int descendant_stage) const {
  const TreeNode& start = node(id);
  if (descendant_stage < start.stage || descendant_stage > horizon_)
    throw ConfigError("descendant stage " + std::to_string(descendant_stage) +
                      " out of range for " + node_str(id));
  std::vector<double> out(stage_size(descendant_stage), 0.0);
  // Depth-first accumulation of edge-probability products within the subtree.
  struct Item {
    int id;
    double p;
  };
  std::vector<Item> stack = {{id, 1.0}};
  while (!stack.empty()) {
    Item it = stack.back();
    stack.pop_back();
    const TreeNode& n = node(it.id);
    if (n.stage == descendant_stage) {
      out[ordinal(n.id)] += it.p;
      continue;
    }
    for (int c : n.children) stack.push_back({c, it.p * node(c).edge_prob});
  }
  return out;
}

StagePartition::StagePartition(const ScenarioTree& tree, int stage, std::vector<int> block_of)
    : stage_(stage), block_of_(std::move(block_of)) {
  const std::size_t n = tree.stage_size(stage);
  if (block_of_.size() != n)
    throw ConfigError("partition covers " + std::to_string(block_of_.size()) + " nodes, stage has " +
                      std::to_string(n));
  int max_block = -1;
  for (int b : block_of_) {
    if (b < 0) throw ConfigError("partition block indices must be nonnegative");
    max_block = std::max(max_block, b);
  }
  block_count_ = static_cast<std::size_t>(max_block) + 1;
  std::vector<bool> seen(block_count_, false);
  for (int b : block_of_) seen[static_cast<std::size_t>(b)] = true;
  for (std::size_t k = 0; k < block_count_; ++k)
    if (!seen[k]) throw ConfigError("partition block " + std::to_string(k) + " is empty");
}

StagePartition StagePartition::whole(const ScenarioTree& tree, int stage) {
  return StagePartition(tree, stage, std::vector<int>(tree.stage_size(stage), 0));
}

StagePartition StagePartition::singletons(const ScenarioTree& tree, int stage) {
  std::vector<int> blocks(tree.stage_size(stage));
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i] = static_cast<int>(i);
  return StagePartition(tree, stage, std::move(blocks));
}

}  // namespace treedp

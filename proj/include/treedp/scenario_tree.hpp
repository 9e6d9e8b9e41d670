#pragma once

#include <memory>
#include <span>
#include <vector>

namespace treedp {

/// Node of a scenario tree. `edge_prob` is the transition probability from
/// the parent (1 for the root); `shock` is the per-node data realized on
/// entering the node (e.g. price increments), empty at the root.
struct TreeNode {
  int id = -1;
  int stage = 0;
  int parent = -1;
  double edge_prob = 1.0;
  std::vector<int> children;
  std::vector<double> shock;
};

struct BranchSpec {
  double prob = 1.0;
  std::vector<double> shock;
};

/// A finite filtered probability space as a rooted tree: depth-t nodes are
/// the atoms of the stage-t sigma-algebra. Immutable after construction and
/// safe for concurrent reads.
///
/// Invariants enforced at construction:
///  - exactly one root at stage 0, all leaves at the final stage,
///  - every edge probability lies in (0,1] (no null branches),
///  - sibling probabilities sum to 1 within 1e-12,
///  - node ids are breadth-first, so per-stage orderings are reproducible.
class ScenarioTree {
public:
  struct NodeInput {
    int parent = -1;  // -1 for the root
    double prob = 1.0;
    std::vector<double> shock;
  };

  ScenarioTree(int horizon, std::vector<NodeInput> nodes);

  /// Tree where every non-terminal node branches the same way at a stage.
  static ScenarioTree from_stage_branching(
      const std::vector<std::vector<BranchSpec>>& branches_per_stage);

  static ScenarioTree binomial(int horizon, double p_up, double up_shock = 1.0,
                               double down_shock = -1.0);
  static ScenarioTree trinomial(int horizon, const std::vector<double>& probs,
                                const std::vector<double>& shocks);

  int horizon() const { return horizon_; }
  int node_count() const { return static_cast<int>(nodes_.size()); }
  const TreeNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  int root() const { return 0; }

  /// Stage-t nodes in stable (breadth-first) index order.
  std::span<const int> atoms(int stage) const;
  std::size_t stage_size(int stage) const { return atoms(stage).size(); }

  /// Index of a node within atoms(stage_of(node)).
  std::size_t ordinal(int id) const { return ordinals_.at(static_cast<std::size_t>(id)); }

  /// Probability of the path from the root to the node; positive by construction.
  double path_probability(int id) const { return path_prob_.at(static_cast<std::size_t>(id)); }

  /// Stage ancestor of a node (the node itself when stage == node.stage).
  int ancestor(int id, int stage) const;

  /// Distribution over atoms(descendant_stage) conditional on the node:
  /// sums to 1 within 1e-12 and vanishes outside the node's subtree.
  std::vector<double> conditional_probability(int id, int descendant_stage) const;

private:
  void validate() const;

  int horizon_ = 0;
  std::vector<TreeNode> nodes_;
  std::vector<std::vector<int>> stage_nodes_;
  std::vector<std::size_t> ordinals_;
  std::vector<double> path_prob_;
};

using TreePtr = std::shared_ptr<const ScenarioTree>;

/// Partition of the stage-t atoms into finitely many nonempty blocks.
class StagePartition {
public:
  StagePartition(const ScenarioTree& tree, int stage, std::vector<int> block_of);

  /// The one-block partition.
  static StagePartition whole(const ScenarioTree& tree, int stage);
  /// One block per stage-t node.
  static StagePartition singletons(const ScenarioTree& tree, int stage);

  int stage() const { return stage_; }
  std::size_t block_count() const { return block_count_; }
  int block_of(std::size_t node_ordinal) const { return block_of_.at(node_ordinal); }
  std::size_t size() const { return block_of_.size(); }

private:
  int stage_ = 0;
  std::size_t block_count_ = 0;
  std::vector<int> block_of_;
};

}  // namespace treedp

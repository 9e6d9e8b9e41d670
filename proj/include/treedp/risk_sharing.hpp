#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "treedp/check_report.hpp"
#include "treedp/conditional.hpp"

namespace treedp {

/// Concave increasing aggregation kernel g with g(0) = 0, applied childwise;
/// the default is the log-exp kernel g(y) = -log E[exp(-y)].
class SharingKernel {
public:
  using Fn = std::function<double(const ScenarioTree&, int node_id, std::span<const double> child_y)>;

  static SharingKernel entropic();
  static SharingKernel custom(Fn fn);

  double at(const ScenarioTree& tree, int node_id, std::span<const double> child_y) const;

private:
  Fn fn_;
};

/// Kernel battery: monotonicity, concavity (Jensen with weights summing to
/// one) and the normalization g(0) = 0.
CheckReport check_kernel(const SharingKernel& kernel, const TreePtr& tree, std::size_t trials,
                         std::uint64_t seed);

/// Agents sharing an aggregate endowment H_s = sum_a H^a_s under the utility
/// u_s(x, y) = x g(y / x) with common kernel g and terminal identity.
struct SharingProblem {
  TreePtr tree;
  /// endowments[agent][stage] is the positive, adapted endowment process.
  std::vector<std::vector<ConditionalValue>> endowments;
  SharingKernel kernel = SharingKernel::entropic();

  void validate() const;
  std::size_t agent_count() const { return endowments.size(); }
  ConditionalValue aggregate(int stage) const;
};

/// Proportional optimal allocation x^a_s = (H^a_t / H_t) H_s for s > t;
/// allocations sum to H_s exactly and stay strictly positive.
/// Returned as [agent][s - t - 1] for s = t+1 .. T.
std::vector<std::vector<ConditionalValue>> closed_form_allocation(const SharingProblem& problem,
                                                                  int t);

/// Value of the shared optimum at stage t, computed by the backward chain
/// w_T = H_T, w_s = H_s g(w_{s+1} / H_s).
ConditionalValue ybar_recursion(const SharingProblem& problem, int t);

/// Composed objective sum_a u_t(H^a_t, .) o ... o u_{T-1}(x^a_{T-1}, x^a_T)
/// for an arbitrary allocation ([agent][s - t - 1] for s = t+1 .. T).
ConditionalValue sharing_objective(const SharingProblem& problem, int t,
                                   const std::vector<std::vector<ConditionalValue>>& allocation);

struct SimplexGridConfig {
  int denominator = 6;          // lattice shares k/m with k >= 1
  std::size_t budget = 100000;  // enumerate when below, else sample
  std::uint64_t seed = 7;
};

/// Dominance check: no lattice allocation beats the recursion value by more
/// than 1e-8 nodewise, and the closed form attains it within 1e-10. The
/// report carries the grid maximum and its gap.
CheckReport numeric_cross_check(const SharingProblem& problem, int t,
                                const SimplexGridConfig& config);

}  // namespace treedp

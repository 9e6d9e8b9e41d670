#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "treedp/check_report.hpp"

namespace treedp {

/// Finite metric space: points 0..n-1 with a distance table. Every subset
/// is closed, so set-valued maps into it need no topology bookkeeping.
struct FiniteMetricSpace {
  std::vector<std::vector<double>> dist;

  std::size_t size() const { return dist.size(); }
  static FiniteMetricSpace discrete(std::size_t n);
  /// Gridded real line: points are coordinates, distance is |a - b|.
  static FiniteMetricSpace line(std::vector<double> coords);
  void validate() const;
};

using SpacePtr = std::shared_ptr<const FiniteMetricSpace>;

/// A function omega -> point index.
using Selection = std::vector<int>;

/// Nonempty subset of the space per sample point, with positive weights
/// (carried for the probability structure, unused by the set calculus).
class FiniteRandomClosedSet {
public:
  FiniteRandomClosedSet(SpacePtr space, std::vector<double> weights,
                        std::vector<std::vector<int>> members);

  std::size_t omega_count() const { return members_.size(); }
  const SpacePtr& space() const { return space_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<int>& at(std::size_t omega) const { return members_.at(omega); }
  const std::vector<std::vector<int>>& members() const { return members_; }

  bool operator==(const FiniteRandomClosedSet& other) const { return members_ == other.members_; }

private:
  SpacePtr space_;
  std::vector<double> weights_;
  std::vector<std::vector<int>> members_;  // sorted point indices, nonempty
};

/// Set of selections closed under pasting along every partition of the
/// sample points; at finite scale this is exactly a product set, stored via
/// its per-omega projections.
class StableSet {
public:
  /// Validates stability of an explicit list (rejects sets missing a pasting).
  static StableSet from_selections(SpacePtr space, std::size_t omega_count,
                                   std::vector<Selection> elements);
  static StableSet product(SpacePtr space, std::vector<std::vector<int>> projections);

  std::size_t omega_count() const { return projections_.size(); }
  const SpacePtr& space() const { return space_; }
  const std::vector<std::vector<int>>& projections() const { return projections_; }

  bool contains(const Selection& x) const;
  std::uint64_t size() const;
  std::vector<Selection> enumerate(std::size_t limit = 1'000'000) const;

  bool operator==(const StableSet& other) const { return projections_ == other.projections_; }

private:
  SpacePtr space_;
  std::vector<std::vector<int>> projections_;  // sorted point indices, nonempty
};

/// All measurable selections X_S of S (a stable product set).
StableSet selections(const FiniteRandomClosedSet& S);

/// The set-valued map S_X with S_X(omega) = {x(omega) : x in X}; uniform
/// weights unless supplied.
FiniteRandomClosedSet set_from_stable(const StableSet& X, std::vector<double> weights = {});

/// Smallest stable superset of the seeds: all pastings along all partitions,
/// which at finite scale is the product of the pointwise projections.
StableSet stable_hull(SpacePtr space, std::size_t omega_count, std::span<const Selection> seeds);

/// Family x_1..x_m (m = max |S(omega)|) with {x_k(omega)} = S(omega) for
/// every omega: the k-th sorted member, clamped to the last.
std::vector<Selection> castaing_family(const FiniteRandomClosedSet& S);

/// Table f(omega, point) in R ∪ {+inf}; at least one finite entry per omega
/// so the epigraphical map is nonempty-valued.
struct FiniteNormalIntegrand {
  SpacePtr space;
  std::vector<std::vector<double>> table;

  std::size_t omega_count() const { return table.size(); }
  void validate() const;
};

/// Round trip through the epigraph constructions: the functional u_f with
/// u_f(x)(omega) = f(omega, x(omega)), the stable epigraph set over the
/// product space E x R (R = attained finite values), its set-valued map, and
/// the recovered integrand from the sections. Asserts f == f_{u_f} on the
/// table and u == u_{f_u} on all selections, exactly.
CheckReport integrand_roundtrip(const FiniteNormalIntegrand& f);

/// Exhaustive small-instance sweep (all set-valued maps with up to 3 sample
/// points and 4 space points) plus randomized larger instances: both
/// reciprocality identities, the product-structure characterization of
/// stability, the covering property of the constructed family, and integrand
/// round trips.
CheckReport reciprocality_suite(std::uint64_t seed, std::size_t randomized_trials);

}  // namespace treedp

#include "treedp/random_sets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <string>

#include "treedp/errors.hpp"
#include "treedp/extended.hpp"

namespace treedp {

FiniteMetricSpace FiniteMetricSpace::discrete(std::size_t n) {
  FiniteMetricSpace space;
  space.dist.assign(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i) space.dist[i][i] = 0.0;
  space.validate();
  return space;
}

FiniteMetricSpace FiniteMetricSpace::line(std::vector<double> coords) {
  FiniteMetricSpace space;
  const std::size_t n = coords.size();
  space.dist.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) space.dist[i][j] = std::abs(coords[i] - coords[j]);
  space.validate();
  return space;
}

void FiniteMetricSpace::validate() const {
  const std::size_t n = dist.size();
  if (n == 0) throw ConfigError("finite metric space must be nonempty");
  for (std::size_t i = 0; i < n; ++i) {
    if (dist[i].size() != n) throw ConfigError("distance table must be square");
    if (dist[i][i] != 0.0) throw ConfigError("distance table diagonal must vanish");
    for (std::size_t j = 0; j < n; ++j) {
      if (dist[i][j] != dist[j][i]) throw ConfigError("distance table must be symmetric");
      if (i != j && !(dist[i][j] > 0.0))
        throw ConfigError("distinct points need positive distance");
      for (std::size_t k = 0; k < n; ++k)
        if (dist[i][k] > dist[i][j] + dist[j][k] + 1e-12)
          throw ConfigError("distance table violates the triangle inequality");
    }
  }
}

FiniteRandomClosedSet::FiniteRandomClosedSet(SpacePtr space, std::vector<double> weights,
                                             std::vector<std::vector<int>> members)
    : space_(std::move(space)), weights_(std::move(weights)), members_(std::move(members)) {
  if (!space_) throw ConfigError("random set needs a space");
  if (members_.empty()) throw ConfigError("random set needs at least one sample point");
  if (weights_.empty()) weights_.assign(members_.size(), 1.0 / static_cast<double>(members_.size()));
  if (weights_.size() != members_.size())
    throw ConfigError("weights must cover every sample point");
  for (double w : weights_)
    if (!(w > 0.0)) throw ConfigError("weights must be positive");
  for (auto& m : members_) {
    if (m.empty()) throw ConfigError("random set must be nonempty at every sample point");
    std::sort(m.begin(), m.end());
    m.erase(std::unique(m.begin(), m.end()), m.end());
    for (int p : m)
      if (p < 0 || static_cast<std::size_t>(p) >= space_->size())
        throw ConfigError("random set member outside the space");
  }
}

StableSet StableSet::product(SpacePtr space, std::vector<std::vector<int>> projections) {
  StableSet x;
  x.space_ = std::move(space);
  x.projections_ = std::move(projections);
  if (x.projections_.empty()) throw ConfigError("stable set needs at least one sample point");
  for (auto& p : x.projections_) {
    if (p.empty()) throw ConfigError("stable set projections must be nonempty");
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
  }
  return x;
}

StableSet StableSet::from_selections(SpacePtr space, std::size_t omega_count,
                                     std::vector<Selection> elements) {
  if (elements.empty()) throw ConfigError("stable set needs at least one selection");
  std::set<Selection> unique_elems;
  std::vector<std::vector<int>> proj(omega_count);
  for (const auto& x : elements) {
    if (x.size() != omega_count) throw ConfigError("selection length mismatch");
    unique_elems.insert(x);
    for (std::size_t w = 0; w < omega_count; ++w) proj[w].push_back(x[w]);
  }
  StableSet candidate = product(std::move(space), std::move(proj));
  if (candidate.size() != unique_elems.size()) {
    // Name one missing pasting as the witness.
    for (const auto& x : candidate.enumerate())
      if (!unique_elems.count(x)) {
        std::string w = "missing pasting (";
        for (std::size_t i = 0; i < x.size(); ++i)
          w += (i ? "," : "") + std::to_string(x[i]);
        throw ConfigError("selection set is not stable: " + w + ")");
      }
  }
  return candidate;
}

bool StableSet::contains(const Selection& x) const {
  if (x.size() != projections_.size()) return false;
  for (std::size_t w = 0; w < x.size(); ++w)
    if (!std::binary_search(projections_[w].begin(), projections_[w].end(), x[w])) return false;
  return true;
}

std::uint64_t StableSet::size() const {
  std::uint64_t n = 1;
  for (const auto& p : projections_) {
    if (n > std::numeric_limits<std::uint64_t>::max() / p.size())
      return std::numeric_limits<std::uint64_t>::max();
    n *= p.size();
  }
  return n;
}

std::vector<Selection> StableSet::enumerate(std::size_t limit) const {
  if (size() > limit)
    throw ResolutionError("stable set too large to materialize (" + std::to_string(size()) + ")");
  std::vector<Selection> out;
  Selection x(projections_.size());
  std::vector<std::size_t> idx(projections_.size(), 0);
  const std::uint64_t total = size();
  for (std::uint64_t c = 0; c < total; ++c) {
    for (std::size_t w = 0; w < x.size(); ++w) x[w] = projections_[w][idx[w]];
    out.push_back(x);
    for (std::size_t w = 0; w < idx.size(); ++w) {
      if (++idx[w] < projections_[w].size()) break;
      idx[w] = 0;
    }
  }
  return out;
}

StableSet selections(const FiniteRandomClosedSet& S) {
  return StableSet::product(S.space(), S.members());
}

FiniteRandomClosedSet set_from_stable(const StableSet& X, std::vector<double> weights) {
  return FiniteRandomClosedSet(X.space(), std::move(weights), X.projections());
}

StableSet stable_hull(SpacePtr space, std::size_t omega_count, std::span<const Selection> seeds) {
  if (seeds.empty()) throw ConfigError("stable hull needs at least one selection");
  std::vector<std::vector<int>> proj(omega_count);
  for (const auto& x : seeds) {
    if (x.size() != omega_count) throw ConfigError("selection length mismatch");
    for (std::size_t w = 0; w < omega_count; ++w) proj[w].push_back(x[w]);
  }
  return StableSet::product(std::move(space), std::move(proj));
}

std::vector<Selection> castaing_family(const FiniteRandomClosedSet& S) {
  std::size_t family_size = 0;
  for (std::size_t w = 0; w < S.omega_count(); ++w)
    family_size = std::max(family_size, S.at(w).size());
  std::vector<Selection> family(family_size, Selection(S.omega_count()));
  for (std::size_t k = 0; k < family_size; ++k)
    for (std::size_t w = 0; w < S.omega_count(); ++w) {
      const auto& m = S.at(w);
      family[k][w] = m[std::min(k, m.size() - 1)];
    }
  return family;
}

void FiniteNormalIntegrand::validate() const {
  if (!space) throw ConfigError("integrand needs a space");
  if (table.empty()) throw ConfigError("integrand needs at least one sample point");
  for (const auto& row : table) {
    if (row.size() != space->size()) throw ConfigError("integrand table width mismatch");
    bool finite = false;
    for (double v : row) {
      if (std::isnan(v) || ext::is_neg_inf(v)) throw ConfigError("integrand values must be > -inf");
      if (ext::is_finite(v)) finite = true;
    }
    if (!finite) throw ConfigError("integrand must be finite somewhere at every sample point");
  }
}

CheckReport integrand_roundtrip(const FiniteNormalIntegrand& f) {
  f.validate();
  CheckReport report;
  const std::size_t omegas = f.omega_count();
  const std::size_t points = f.space->size();

  // u_f(x)(omega) = f(omega, x(omega)).
  auto u_f = [&f](const Selection& x, std::size_t w) {
    return f.table[w][static_cast<std::size_t>(x[w])];
  };

  // Attained finite values form the r-grid; exactness needs no other levels.
  std::vector<double> r_grid;
  for (const auto& row : f.table)
    for (double v : row)
      if (ext::is_finite(v)) r_grid.push_back(v);
  std::sort(r_grid.begin(), r_grid.end());
  r_grid.erase(std::unique(r_grid.begin(), r_grid.end()), r_grid.end());
  const std::size_t levels = r_grid.size();

  // Epigraph set over the product space E x R, encoded as e * levels + ri.
  auto pair_space = std::make_shared<FiniteMetricSpace>(
      FiniteMetricSpace::discrete(points * levels));
  std::vector<std::vector<int>> epi_proj(omegas);
  for (std::size_t w = 0; w < omegas; ++w)
    for (std::size_t e = 0; e < points; ++e)
      for (std::size_t ri = 0; ri < levels; ++ri)
        if (r_grid[ri] >= f.table[w][e])
          epi_proj[w].push_back(static_cast<int>(e * levels + ri));
  const StableSet epigraph = StableSet::product(pair_space, std::move(epi_proj));
  const FiniteRandomClosedSet s_epi = set_from_stable(epigraph);

  // Recovered integrand: infimum of the e-section of the set-valued map.
  std::vector<std::vector<double>> recovered(omegas, std::vector<double>(points, ext::kPosInf));
  for (std::size_t w = 0; w < omegas; ++w)
    for (int packed : s_epi.at(w)) {
      const std::size_t e = static_cast<std::size_t>(packed) / levels;
      const double r = r_grid[static_cast<std::size_t>(packed) % levels];
      recovered[w][e] = std::min(recovered[w][e], r);
    }

  {
    bool ok = true;
    std::string witness;
    for (std::size_t w = 0; w < omegas && ok; ++w)
      for (std::size_t e = 0; e < points; ++e)
        if (recovered[w][e] != f.table[w][e]) {
          ok = false;
          witness = "omega " + std::to_string(w) + ", point " + std::to_string(e) + ": " +
                    std::to_string(recovered[w][e]) + " vs " + std::to_string(f.table[w][e]);
          break;
        }
    report.add("integrand table roundtrip", ok, witness);
  }

  // Functional identity on every selection.
  {
    bool ok = true;
    std::string witness;
    std::uint64_t total = 1;
    for (std::size_t w = 0; w < omegas; ++w) total *= points;
    if (total > 1'000'000) {
      report.add("functional roundtrip", false, "selection space too large");
      return report;
    }
    Selection x(omegas, 0);
    for (std::uint64_t c = 0; c < total && ok; ++c) {
      for (std::size_t w = 0; w < omegas; ++w) {
        const double lhs = u_f(x, w);
        const double rhs = recovered[w][static_cast<std::size_t>(x[w])];
        if (lhs != rhs) {
          ok = false;
          witness = "selection mismatch at omega " + std::to_string(w);
          break;
        }
      }
      for (std::size_t w = 0; w < omegas; ++w) {
        if (++x[w] < static_cast<int>(points)) break;
        x[w] = 0;
      }
    }
    report.add("functional roundtrip on all selections", ok, witness);
  }
  return report;
}

namespace {

/// Runs the identities on one instance; returns an empty string on success.
std::string run_instance(const FiniteRandomClosedSet& S) {
  const StableSet X = selections(S);
  if (!(set_from_stable(X, S.weights()) == S)) return "set_from_stable(selections(S)) != S";

  // Product count |X_S| = prod |S(omega)|.
  std::uint64_t expect = 1;
  for (std::size_t w = 0; w < S.omega_count(); ++w) expect *= S.at(w).size();
  if (X.size() != expect) return "selection count mismatch";

  // Stability <-> product structure, both directions.
  if (X.size() <= 4096) {
    auto elems = X.enumerate();
    const StableSet rebuilt = StableSet::from_selections(S.space(), S.omega_count(), elems);
    if (!(rebuilt == X)) return "product reconstruction mismatch";
    for (const auto& x : elems)
      if (!X.contains(x)) return "enumerated selection not contained";
  }

  // Covering family.
  const auto family = castaing_family(S);
  for (std::size_t w = 0; w < S.omega_count(); ++w) {
    std::set<int> seen;
    for (const auto& x : family) seen.insert(x[w]);
    std::set<int> expected(S.at(w).begin(), S.at(w).end());
    if (seen != expected) return "castaing family does not cover";
  }
  return {};
}

}  // namespace

CheckReport reciprocality_suite(std::uint64_t seed, std::size_t randomized_trials) {
  CheckReport report;

  // Exhaustive: every set-valued map with |Omega| <= 3, |E| <= 4.
  {
    std::size_t instances = 0;
    std::string witness;
    bool ok = true;
    for (std::size_t points = 1; points <= 4 && ok; ++points) {
      auto space = std::make_shared<FiniteMetricSpace>(FiniteMetricSpace::discrete(points));
      const std::size_t subsets = (1u << points) - 1;  // nonempty subsets
      for (std::size_t omegas = 1; omegas <= 3 && ok; ++omegas) {
        std::vector<std::size_t> pick(omegas, 1);
        while (true) {
          std::vector<std::vector<int>> members(omegas);
          for (std::size_t w = 0; w < omegas; ++w)
            for (std::size_t p = 0; p < points; ++p)
              if (pick[w] >> p & 1) members[w].push_back(static_cast<int>(p));
          FiniteRandomClosedSet S(space, {}, std::move(members));
          ++instances;
          const std::string err = run_instance(S);
          if (!err.empty()) {
            ok = false;
            witness = err + " (instance " + std::to_string(instances) + ")";
            break;
          }
          std::size_t w = 0;
          for (; w < omegas; ++w) {
            if (++pick[w] <= subsets) break;
            pick[w] = 1;
          }
          if (w == omegas) break;
        }
      }
    }
    report.add("exhaustive reciprocality (" + std::to_string(instances) + " instances)", ok,
               witness);
  }

  // Randomized larger instances, plus integrand round trips.
  {
    std::mt19937_64 rng(seed);
    bool ok = true;
    std::string witness;
    std::size_t roundtrips = 0;
    for (std::size_t trial = 0; trial < randomized_trials && ok; ++trial) {
      const std::size_t points = 2 + rng() % 5;
      const std::size_t omegas = 2 + rng() % 5;
      auto space = std::make_shared<FiniteMetricSpace>(FiniteMetricSpace::discrete(points));
      std::vector<std::vector<int>> members(omegas);
      for (auto& m : members) {
        for (std::size_t p = 0; p < points; ++p)
          if (rng() % 2) m.push_back(static_cast<int>(p));
        if (m.empty()) m.push_back(static_cast<int>(rng() % points));
      }
      FiniteRandomClosedSet S(space, {}, std::move(members));
      const std::string err = run_instance(S);
      if (!err.empty()) {
        ok = false;
        witness = err + " (trial " + std::to_string(trial) + ")";
        break;
      }

      FiniteNormalIntegrand f;
      f.space = space;
      f.table.assign(omegas, std::vector<double>(points));
      for (std::size_t w = 0; w < omegas; ++w) {
        for (std::size_t e = 0; e < points; ++e)
          f.table[w][e] =
              rng() % 5 == 0 ? ext::kPosInf : static_cast<double>(static_cast<int>(rng() % 19) - 9);
        bool finite = false;
        for (double v : f.table[w]) finite = finite || ext::is_finite(v);
        if (!finite) f.table[w][0] = 0.0;
      }
      auto rt = integrand_roundtrip(f);
      ++roundtrips;
      if (!rt.all_passed()) {
        ok = false;
        witness = "integrand roundtrip failed (trial " + std::to_string(trial) + ")";
      }
    }
    report.add("randomized reciprocality and " + std::to_string(roundtrips) + " roundtrips", ok,
               witness);
  }
  return report;
}

}  // namespace treedp

#include "treedp/control_sets.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "treedp/errors.hpp"
#include "treedp/extended.hpp"

namespace treedp {

namespace {

constexpr int kMaxDoublings = 60;
constexpr double kBisectTol = 1e-6;
constexpr double kSafetyFactor = 1.1;
constexpr std::size_t kGridCap = 5'000'000;
constexpr std::uint64_t kDirectionSeed = 0x51DE5CA7F00DULL;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> z) {
  return std::sqrt(dot(z, z));
}

std::vector<double> linspace(double lo, double hi, double max_spacing) {
  if (hi < lo) std::swap(lo, hi);
  if (hi - lo < 1e-15) return {lo};
  const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / max_spacing)) + 1;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

/// Ray directions: the 2d axes, the sign-pattern diagonals (d <= 6), and 2d
/// random unit directions from a fixed seed.
std::vector<std::vector<double>> scan_directions(int d) {
  std::vector<std::vector<double>> dirs;
  for (int i = 0; i < d; ++i) {
    std::vector<double> u(static_cast<std::size_t>(d), 0.0);
    u[static_cast<std::size_t>(i)] = 1.0;
    dirs.push_back(u);
    u[static_cast<std::size_t>(i)] = -1.0;
    dirs.push_back(u);
  }
  if (d >= 2 && d <= 6) {
    const double inv = 1.0 / std::sqrt(static_cast<double>(d));
    for (int mask = 0; mask < (1 << d); ++mask) {
      std::vector<double> u(static_cast<std::size_t>(d));
      for (int i = 0; i < d; ++i) u[static_cast<std::size_t>(i)] = (mask >> i & 1) ? inv : -inv;
      dirs.push_back(std::move(u));
    }
  }
  std::mt19937_64 rng(kDirectionSeed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int k = 0; k < 2 * d; ++k) {
    std::vector<double> u(static_cast<std::size_t>(d));
    double n2 = 0.0;
    do {
      n2 = 0.0;
      for (double& v : u) {
        v = gauss(rng);
        n2 += v * v;
      }
    } while (n2 < 1e-12);
    const double inv = 1.0 / std::sqrt(n2);
    for (double& v : u) v *= inv;
    dirs.push_back(std::move(u));
  }
  return dirs;
}

}  // namespace

int ControlSetSpec::node_id(std::size_t node_ordinal) const {
  return tree_->atoms(stage_)[node_ordinal];
}

ControlSetSpec ControlSetSpec::box(TreePtr tree, int stage, std::vector<double> lower,
                                   std::vector<double> upper) {
  if (lower.size() != upper.size() || lower.empty())
    throw ConfigError("box control set needs matching, nonempty bound vectors");
  for (std::size_t i = 0; i < lower.size(); ++i)
    if (lower[i] > upper[i]) throw ConfigError("box control set has inverted bounds");
  const int d = static_cast<int>(lower.size());
  auto lo = [lower](std::size_t, double, int coord) { return lower[static_cast<std::size_t>(coord)]; };
  auto hi = [upper](std::size_t, double, int coord) { return upper[static_cast<std::size_t>(coord)]; };
  return box(std::move(tree), stage, [d](std::size_t, double) { return d; }, lo, hi);
}

ControlSetSpec ControlSetSpec::box(TreePtr tree, int stage, DimFn dim, BoundFn lower,
                                   BoundFn upper) {
  ControlSetSpec s;
  s.tree_ = std::move(tree);
  s.stage_ = stage;
  s.kind_ = Kind::Box;
  s.dim_fn_ = std::move(dim);
  s.lower_ = std::move(lower);
  s.upper_ = std::move(upper);
  return s;
}

ControlSetSpec ControlSetSpec::risk_constrained(TreePtr tree, int stage, ConditionalRiskMeasure rho,
                                                bool with_consumption,
                                                std::optional<ConditionalValue> delta_s) {
  ControlSetSpec s;
  s.stage_ = stage;
  s.kind_ = Kind::RiskConstrained;
  s.rho_ = std::move(rho);
  s.with_consumption_ = with_consumption;
  if (delta_s) {
    if (delta_s->stage() != stage + 1 || delta_s->payload() != Payload::Vector)
      throw ConfigError("risk-constrained increments must be stage-(t+1) vectors");
    s.delta_s_ = std::move(delta_s);
  }
  s.tree_ = std::move(tree);
  // Children of a node must agree on the increment dimension.
  for (int id : s.tree_->atoms(stage)) {
    const TreeNode& n = s.tree_->node(id);
    std::size_t d = 0;
    for (std::size_t j = 0; j < n.children.size(); ++j) {
      const std::size_t dj = s.delta_s_ ? s.delta_s_->dim(s.tree_->ordinal(n.children[j]))
                                        : s.tree_->node(n.children[j]).shock.size();
      if (j == 0)
        d = dj;
      else if (dj != d)
        throw ConfigError("risk-constrained set: increment dimension differs among children of node " +
                          std::to_string(id));
    }
    if (d == 0) throw ConfigError("risk-constrained set needs nonempty increments at node " +
                                  std::to_string(id));
  }
  return s;
}

ControlSetSpec ControlSetSpec::upper_level(TreePtr tree, int stage, int dim, ScoreFn score,
                                           double threshold_offset) {
  if (dim < 1) throw ConfigError("upper-level control set needs a positive dimension");
  ControlSetSpec s;
  s.tree_ = std::move(tree);
  s.stage_ = stage;
  s.kind_ = Kind::UpperLevel;
  s.fixed_dim_ = dim;
  s.score_ = std::move(score);
  s.threshold_offset_ = threshold_offset;
  return s;
}

ControlSetSpec ControlSetSpec::explicit_grid(TreePtr tree, int stage,
                                             std::vector<std::vector<std::vector<double>>> points) {
  ControlSetSpec s;
  s.stage_ = stage;
  s.kind_ = Kind::ExplicitGrid;
  if (points.size() != tree->stage_size(stage))
    throw ConfigError("explicit control grid must cover every stage node");
  for (const auto& per_node : points)
    if (per_node.empty()) throw ConfigError("explicit control grid has an empty node entry");
  s.points_ = std::move(points);
  s.tree_ = std::move(tree);
  return s;
}

ControlSetSpec ControlSetSpec::custom(TreePtr tree, int stage, int dim, PredicateFn predicate) {
  if (dim < 1) throw ConfigError("custom control set needs a positive dimension");
  ControlSetSpec s;
  s.tree_ = std::move(tree);
  s.stage_ = stage;
  s.kind_ = Kind::Custom;
  s.fixed_dim_ = dim;
  s.predicate_ = std::move(predicate);
  return s;
}

int ControlSetSpec::dim(std::size_t node_ordinal, double x) const {
  switch (kind_) {
    case Kind::Box:
      return dim_fn_(node_ordinal, x);
    case Kind::RiskConstrained: {
      const TreeNode& n = tree_->node(node_id(node_ordinal));
      const std::size_t d = delta_s_ ? delta_s_->dim(tree_->ordinal(n.children.front()))
                                     : tree_->node(n.children.front()).shock.size();
      return static_cast<int>(d) + (with_consumption_ ? 1 : 0);
    }
    case Kind::UpperLevel:
    case Kind::Custom:
      return fixed_dim_;
    case Kind::ExplicitGrid:
      return static_cast<int>(points_[node_ordinal].front().size());
  }
  throw Error("unreachable");
}

bool ControlSetSpec::feasible(std::size_t node_ordinal, double x, std::span<const double> z,
                              double slack) const {
  const int d = dim(node_ordinal, x);
  if (static_cast<int>(z.size()) != d)
    throw ConfigError("control dimension mismatch at node ordinal " + std::to_string(node_ordinal) +
                      ": expected " + std::to_string(d) + ", got " + std::to_string(z.size()));
  switch (kind_) {
    case Kind::Box: {
      for (int i = 0; i < d; ++i) {
        if (z[static_cast<std::size_t>(i)] < lower_(node_ordinal, x, i) - slack) return false;
        if (z[static_cast<std::size_t>(i)] > upper_(node_ordinal, x, i) + slack) return false;
      }
      return true;
    }
    case Kind::RiskConstrained: {
      const TreeNode& n = tree_->node(node_id(node_ordinal));
      const std::size_t assets = static_cast<std::size_t>(d) - (with_consumption_ ? 1 : 0);
      const double c = with_consumption_ ? z[assets] : 0.0;
      if (with_consumption_ && (c < -slack || c > x + slack)) return false;
      if (!with_consumption_ && x < -slack) return false;
      std::vector<double> gains(n.children.size());
      for (std::size_t j = 0; j < n.children.size(); ++j) {
        const int cid = n.children[j];
        std::span<const double> ds = delta_s_ ? delta_s_->vec(tree_->ordinal(cid))
                                              : std::span<const double>(tree_->node(cid).shock);
        gains[j] = dot(z.subspan(0, assets), ds);
      }
      return rho_->evaluate_at(*tree_, n.id, gains) <= x - c + slack;
    }
    case Kind::UpperLevel:
      return score_(node_id(node_ordinal), x, z) >= x - threshold_offset_ - slack;
    case Kind::ExplicitGrid: {
      for (const auto& p : points_[node_ordinal]) {
        if (p.size() != z.size()) continue;
        bool same = true;
        for (std::size_t i = 0; i < p.size() && same; ++i)
          if (std::abs(p[i] - z[i]) > slack) same = false;
        if (same) return true;
      }
      return false;
    }
    case Kind::Custom:
      return predicate_(node_id(node_ordinal), x, z, slack);
  }
  throw Error("unreachable");
}

double ControlSetSpec::bounding_radius(std::size_t node_ordinal, double x) const {
  if (kind_ == Kind::ExplicitGrid) {
    double m = 0.0;
    for (const auto& p : points_[node_ordinal]) m = std::max(m, norm(p));
    return m;
  }
  const int d = dim(node_ordinal, x);
  double best = 0.0;
  for (const auto& u : scan_directions(d)) {
    std::vector<double> z(u.size());
    auto feasible_at = [&](double t) {
      for (std::size_t i = 0; i < u.size(); ++i) z[i] = t * u[i];
      return feasible(node_ordinal, x, z);
    };
    double lo = 0.0, hi = 1.0;
    int doublings = 0;
    while (feasible_at(hi)) {
      lo = hi;
      hi *= 2.0;
      if (++doublings > kMaxDoublings)
        throw UnboundedError("control set unbounded along a ray at node ordinal " +
                             std::to_string(node_ordinal) + " (state " + std::to_string(x) + ")");
    }
    while (hi - lo > kBisectTol) {
      const double mid = 0.5 * (lo + hi);
      (feasible_at(mid) ? lo : hi) = mid;
    }
    best = std::max(best, hi);
  }
  return kSafetyFactor * best;
}

std::vector<std::vector<double>> ControlSetSpec::discretize(std::size_t node_ordinal, double x,
                                                            double h) const {
  if (!(h > 0.0)) throw ConfigError("control resolution must be positive");
  if (kind_ == Kind::ExplicitGrid) return points_[node_ordinal];

  const int d = dim(node_ordinal, x);
  std::vector<std::vector<double>> axes(static_cast<std::size_t>(d));
  if (kind_ == Kind::Box) {
    for (int i = 0; i < d; ++i)
      axes[static_cast<std::size_t>(i)] =
          linspace(lower_(node_ordinal, x, i), upper_(node_ordinal, x, i), h);
  } else {
    const double m = bounding_radius(node_ordinal, x);
    const std::size_t assets =
        kind_ == Kind::RiskConstrained ? static_cast<std::size_t>(d) - (with_consumption_ ? 1 : 0)
                                       : static_cast<std::size_t>(d);
    for (std::size_t i = 0; i < assets; ++i) axes[i] = linspace(-m, m, h);
    if (kind_ == Kind::RiskConstrained && with_consumption_)
      axes[assets] = linspace(0.0, std::max(x, 0.0), h);
  }

  std::size_t total = 1;
  for (const auto& a : axes) {
    total *= a.size();
    if (total > kGridCap)
      throw ResolutionError("control grid exceeds " + std::to_string(kGridCap) +
                            " points; increase the resolution h");
  }

  std::vector<std::vector<double>> out;
  std::vector<double> z(static_cast<std::size_t>(d));
  std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
  for (std::size_t count = 0; count < total; ++count) {
    for (std::size_t i = 0; i < axes.size(); ++i) z[i] = axes[i][idx[i]];
    if (feasible(node_ordinal, x, z)) out.push_back(z);
    for (std::size_t i = 0; i < axes.size(); ++i) {
      if (++idx[i] < axes[i].size()) break;
      idx[i] = 0;
    }
  }

  // Anchor: the all-zero control is representable exactly whenever feasible.
  std::vector<double> anchor(static_cast<std::size_t>(d), 0.0);
  if (feasible(node_ordinal, x, anchor)) {
    bool present = false;
    for (const auto& p : out)
      if (p == anchor) {
        present = true;
        break;
      }
    if (!present) out.push_back(anchor);
  }

  if (out.empty())
    throw ResolutionError("empty control grid at node ordinal " + std::to_string(node_ordinal) +
                          " (state " + std::to_string(x) + "); try h = " + std::to_string(h / 2.0));
  return out;
}

const std::vector<std::vector<double>>& ControlSetSpec::grid_points(std::size_t node_ordinal) const {
  if (kind_ != Kind::ExplicitGrid) throw ConfigError("grid_points is only meaningful for explicit grids");
  return points_[node_ordinal];
}

std::optional<double> ControlSetSpec::state_floor() const {
  if (kind_ == Kind::RiskConstrained && with_consumption_) return 0.0;
  return std::nullopt;
}

ConditionalValue ControlSetSpec::is_feasible(const ConditionalValue& x,
                                             const ConditionalValue& z) const {
  if (x.stage() != stage_ || z.stage() != stage_)
    throw ConfigError("feasibility query stage mismatch");
  ConditionalValue::IntegerData out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = feasible(i, x.scalar(i), z.vec(i)) ? 1 : 0;
  return ConditionalValue::integers(x.tree_ptr(), stage_, std::move(out));
}

ConditionalValue ControlSetSpec::bounding_radius(const ConditionalValue& x) const {
  if (x.stage() != stage_) throw ConfigError("bounding radius stage mismatch");
  ConditionalValue::ScalarData out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = bounding_radius(i, x.scalar(i));
  return ConditionalValue::scalars(x.tree_ptr(), stage_, std::move(out));
}

CheckReport ControlSetSpec::check_c4_surrogate(std::span<const ConditionalValue> x_seq,
                                               std::span<const ConditionalValue> z_seq) const {
  CheckReport report;
  if (x_seq.size() != z_seq.size() || x_seq.empty()) {
    report.add("c4 surrogate", false, "state and control sequences must align and be nonempty");
    return report;
  }

  bool along_ok = true;
  std::string along_witness;
  for (std::size_t k = 0; k < x_seq.size() && along_ok; ++k) {
    auto flags = is_feasible(x_seq[k], z_seq[k]);
    for (std::size_t i = 0; i < flags.size(); ++i)
      if (flags.integer(i) == 0) {
        along_ok = false;
        along_witness =
            "element " + std::to_string(k) + " infeasible at node ordinal " + std::to_string(i);
        break;
      }
  }
  report.add("feasibility along the sequence", along_ok, along_witness);

  const auto& x_lim = x_seq.back();
  const auto& z_lim = z_seq.back();
  bool closed_ok = true;
  std::string closed_witness;
  for (std::size_t i = 0; i < x_lim.size(); ++i)
    if (!feasible(i, x_lim.scalar(i), z_lim.vec(i), 1e-7)) {
      closed_ok = false;
      closed_witness = "limit pair infeasible at node ordinal " + std::to_string(i);
      break;
    }
  report.add("closedness at the limit", closed_ok, closed_witness);

  bool bounded_ok = true;
  std::string bounded_witness;
  double max_radius = 0.0;
  try {
    for (const auto& xk : x_seq) {
      auto r = bounding_radius(xk);
      for (std::size_t i = 0; i < r.size(); ++i) max_radius = std::max(max_radius, r.scalar(i));
    }
  } catch (const UnboundedError& e) {
    bounded_ok = false;
    bounded_witness = e.what();
  }
  report.add("uniform boundedness", bounded_ok,
             bounded_ok ? "max radius " + std::to_string(max_radius) : bounded_witness);
  return report;
}

CheckReport check_control_stability(const ControlSetSpec& spec,
                                    std::span<const ConditionalValue> states,
                                    std::span<const StagePartition> partitions, double h) {
  CheckReport report;
  if (states.empty() || partitions.empty()) {
    report.add("control-set stability", false, "empty battery");
    return report;
  }
  std::size_t trial = 0;
  for (const auto& partition : partitions) {
    ++trial;
    const std::string label = "control-set stability trial " + std::to_string(trial);
    std::vector<ConditionalValue> x_parts;
    std::vector<ConditionalValue> z_parts;
    bool built = true;
    for (std::size_t k = 0; k < partition.block_count() && built; ++k) {
      const auto& x = states[(trial + k) % states.size()];
      ConditionalValue::VectorData zs(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        try {
          zs[i] = spec.discretize(i, x.scalar(i), h).front();
        } catch (const Error&) {
          built = false;
          break;
        }
      }
      if (!built) break;
      x_parts.push_back(x);
      z_parts.push_back(ConditionalValue::vectors(x.tree_ptr(), x.stage(), std::move(zs)));
    }
    if (!built) {
      report.add(label, false, "could not pick feasible controls for a part");
      continue;
    }
    auto x_paste = concatenate(x_parts, partition);
    auto z_paste = concatenate(z_parts, partition);
    auto flags = spec.is_feasible(x_paste, z_paste);
    bool ok = true;
    std::string witness;
    for (std::size_t i = 0; i < flags.size(); ++i)
      if (flags.integer(i) == 0) {
        ok = false;
        witness = "pasted control infeasible at node ordinal " + std::to_string(i);
        break;
      }
    report.add(label, ok, witness);
  }
  return report;
}

CheckReport check_dimension_stabilization(const ControlSetSpec& spec,
                                          std::span<const ConditionalValue> x_seq,
                                          const ConditionalValue& x_limit) {
  CheckReport report;
  if (x_seq.empty()) {
    report.add("dimension stabilization", false, "empty sequence");
    return report;
  }
  bool ok = true;
  std::string witness;
  for (std::size_t i = 0; i < x_limit.size() && ok; ++i) {
    const int d_lim = spec.dim(i, x_limit.scalar(i));
    // Find the first index past which the dimension equals the limit's.
    std::size_t n0 = x_seq.size();
    for (std::size_t n = x_seq.size(); n-- > 0;) {
      if (spec.dim(i, x_seq[n].scalar(i)) != d_lim) break;
      n0 = n;
    }
    if (n0 == x_seq.size()) {
      ok = false;
      witness = "node ordinal " + std::to_string(i) + ": dimension never settles at " +
                std::to_string(d_lim);
    }
  }
  report.add("dimension stabilization", ok, witness);
  return report;
}

}  // namespace treedp

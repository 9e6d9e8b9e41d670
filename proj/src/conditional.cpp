#include "treedp/conditional.hpp"

#include <cmath>
#include <string>

#include "treedp/errors.hpp"

namespace treedp {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

// Block of the i-th stage-s atom under a stage-t partition with t <= s:
// membership is inherited from the stage-t ancestor.
int block_at(const ScenarioTree& tree, const StagePartition& partition, int stage,
             std::size_t ordinal) {
  const int id = tree.atoms(stage)[ordinal];
  const int anc = tree.ancestor(id, partition.stage());
  return partition.block_of(tree.ordinal(anc));
}

}  // namespace

ConditionalValue::ConditionalValue(TreePtr tree, int stage, Payload payload,
                                   std::variant<ScalarData, VectorData, IntegerData> data)
    : tree_(std::move(tree)), stage_(stage), payload_(payload), data_(std::move(data)) {
  require(tree_ != nullptr, "conditional value needs a tree");
  require(stage_ >= 0 && stage_ <= tree_->horizon(), "conditional value stage out of range");
  require(size() == tree_->stage_size(stage_),
          "conditional value must carry exactly one payload per stage node");
  if (payload_ == Payload::Vector) {
    for (const auto& v : std::get<VectorData>(data_))
      for (double x : v)
        require(std::isfinite(x), "vector payloads must be finite");
  }
}

ConditionalValue ConditionalValue::scalars(TreePtr tree, int stage, ScalarData values) {
  for (double v : values) require(!std::isnan(v), "scalar payloads must not be NaN");
  return ConditionalValue(std::move(tree), stage, Payload::Scalar, std::move(values));
}

ConditionalValue ConditionalValue::constant(TreePtr tree, int stage, double value) {
  const std::size_t n = tree->stage_size(stage);
  return scalars(std::move(tree), stage, ScalarData(n, value));
}

ConditionalValue ConditionalValue::vectors(TreePtr tree, int stage, VectorData values) {
  return ConditionalValue(std::move(tree), stage, Payload::Vector, std::move(values));
}

ConditionalValue ConditionalValue::integers(TreePtr tree, int stage, IntegerData values) {
  return ConditionalValue(std::move(tree), stage, Payload::Integer, std::move(values));
}

std::size_t ConditionalValue::size() const {
  switch (payload_) {
    case Payload::Scalar: return std::get<ScalarData>(data_).size();
    case Payload::Vector: return std::get<VectorData>(data_).size();
    case Payload::Integer: return std::get<IntegerData>(data_).size();
  }
  return 0;
}

std::span<const double> ConditionalValue::vec(std::size_t i) const {
  return std::get<VectorData>(data_).at(i);
}

ConditionalValue ConditionalValue::map_scalars(const std::function<double(double)>& f) const {
  require(payload_ == Payload::Scalar, "map_scalars needs a scalar payload");
  ScalarData out = scalar_data();
  for (double& v : out) v = f(v);
  return scalars(tree_, stage_, std::move(out));
}

bool ConditionalValue::same_shape_as(const ConditionalValue& other) const {
  if (stage_ != other.stage_ || payload_ != other.payload_ || size() != other.size()) return false;
  if (payload_ == Payload::Vector)
    for (std::size_t i = 0; i < size(); ++i)
      if (dim(i) != other.dim(i)) return false;
  return true;
}

bool ConditionalValue::equals(const ConditionalValue& other, double tol) const {
  if (!same_shape_as(other)) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    switch (payload_) {
      case Payload::Scalar: {
        const double a = scalar(i), b = other.scalar(i);
        if (std::isinf(a) || std::isinf(b)) {
          if (a != b) return false;
        } else if (std::abs(a - b) > tol) {
          return false;
        }
        break;
      }
      case Payload::Vector: {
        auto a = vec(i), b = other.vec(i);
        for (std::size_t j = 0; j < a.size(); ++j)
          if (std::abs(a[j] - b[j]) > tol) return false;
        break;
      }
      case Payload::Integer:
        if (integer(i) != other.integer(i)) return false;
        break;
    }
  }
  return true;
}

ConditionalValue concatenate(std::span<const ConditionalValue> parts,
                             const StagePartition& partition) {
  require(!parts.empty(), "concatenate needs at least one part");
  require(partition.block_count() <= parts.size(),
          "concatenate: partition has more blocks than parts");
  const ConditionalValue& first = parts[0];
  for (const auto& p : parts) {
    require(p.stage() == first.stage(), "concatenate: stage mismatch between parts");
    require(p.payload() == first.payload(), "concatenate: payload mismatch between parts");
  }
  require(partition.stage() <= first.stage(),
          "concatenate: partition stage must not exceed the parts' stage");

  const ScenarioTree& tree = first.tree();
  const int stage = first.stage();
  const std::size_t n = first.size();
  switch (first.payload()) {
    case Payload::Scalar: {
      ConditionalValue::ScalarData out(n);
      for (std::size_t i = 0; i < n; ++i)
        out[i] = parts[static_cast<std::size_t>(block_at(tree, partition, stage, i))].scalar(i);
      return ConditionalValue::scalars(first.tree_ptr(), stage, std::move(out));
    }
    case Payload::Vector: {
      // Parts may differ in dimension across blocks: the result lives in the
      // space with the pasted (per-node) dimension map.
      ConditionalValue::VectorData out(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto& part = parts[static_cast<std::size_t>(block_at(tree, partition, stage, i))];
        auto v = part.vec(i);
        out[i].assign(v.begin(), v.end());
      }
      return ConditionalValue::vectors(first.tree_ptr(), stage, std::move(out));
    }
    case Payload::Integer: {
      ConditionalValue::IntegerData out(n);
      for (std::size_t i = 0; i < n; ++i)
        out[i] = parts[static_cast<std::size_t>(block_at(tree, partition, stage, i))].integer(i);
      return ConditionalValue::integers(first.tree_ptr(), stage, std::move(out));
    }
  }
  throw Error("unreachable");
}

ConditionalValue metric(const ConditionalValue& x, const ConditionalValue& y) {
  require(x.stage() == y.stage(), "metric: stage mismatch");
  require(x.payload() == y.payload(), "metric: payload mismatch");
  const std::size_t n = x.size();
  ConditionalValue::ScalarData out(n, 0.0);
  switch (x.payload()) {
    case Payload::Scalar:
      for (std::size_t i = 0; i < n; ++i) {
        const double a = x.scalar(i), b = y.scalar(i);
        out[i] = (std::isinf(a) && a == b) ? 0.0 : std::abs(a - b);
      }
      break;
    case Payload::Vector:
      for (std::size_t i = 0; i < n; ++i) {
        auto a = x.vec(i), b = y.vec(i);
        require(a.size() == b.size(),
                "metric: dimension mismatch on node ordinal " + std::to_string(i));
        double s = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
        out[i] = std::sqrt(s);
      }
      break;
    case Payload::Integer:
      for (std::size_t i = 0; i < n; ++i) out[i] = x.integer(i) == y.integer(i) ? 0.0 : 1.0;
      break;
  }
  return ConditionalValue::scalars(x.tree_ptr(), x.stage(), std::move(out));
}

ConditionalValue essential_sup(std::span<const ConditionalValue> values) {
  require(!values.empty(), "essential_sup of an empty family");
  const ConditionalValue& first = values[0];
  require(first.payload() == Payload::Scalar, "essential_sup needs scalar payloads");
  ConditionalValue::ScalarData out = first.scalar_data();
  for (std::size_t k = 1; k < values.size(); ++k) {
    require(values[k].stage() == first.stage(), "essential_sup: stage mismatch");
    require(values[k].payload() == Payload::Scalar, "essential_sup needs scalar payloads");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], values[k].scalar(i));
  }
  return ConditionalValue::scalars(first.tree_ptr(), first.stage(), std::move(out));
}

ConditionalValue essential_inf(std::span<const ConditionalValue> values) {
  require(!values.empty(), "essential_inf of an empty family");
  const ConditionalValue& first = values[0];
  require(first.payload() == Payload::Scalar, "essential_inf needs scalar payloads");
  ConditionalValue::ScalarData out = first.scalar_data();
  for (std::size_t k = 1; k < values.size(); ++k) {
    require(values[k].stage() == first.stage(), "essential_inf: stage mismatch");
    require(values[k].payload() == Payload::Scalar, "essential_inf needs scalar payloads");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(out[i], values[k].scalar(i));
  }
  return ConditionalValue::scalars(first.tree_ptr(), first.stage(), std::move(out));
}

ConditionalValue conditional_expectation(const ConditionalValue& x, int stage) {
  require(x.payload() == Payload::Scalar, "conditional_expectation needs a scalar payload");
  require(stage >= 0 && stage <= x.stage(),
          "conditional_expectation: target stage must not exceed the payload stage");
  for (std::size_t i = 0; i < x.size(); ++i)
    require(std::isfinite(x.scalar(i)), "conditional_expectation: payload must be finite");

  const ScenarioTree& tree = x.tree();
  auto targets = tree.atoms(stage);
  ConditionalValue::ScalarData out(targets.size(), 0.0);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto kernel = tree.conditional_probability(targets[i], x.stage());
    double s = 0.0;
    for (std::size_t j = 0; j < kernel.size(); ++j)
      if (kernel[j] > 0.0) s += kernel[j] * x.scalar(j);
    out[i] = s;
  }
  return ConditionalValue::scalars(x.tree_ptr(), stage, std::move(out));
}

ConditionalValue select_subsequence(std::span<const ConditionalValue> seq,
                                    const ConditionalValue& indices) {
  require(!seq.empty(), "select_subsequence needs a nonempty sequence");
  require(indices.payload() == Payload::Integer, "selection indices must be integers");
  const ConditionalValue& first = seq[0];
  require(first.payload() == Payload::Scalar, "select_subsequence supports scalar payloads");
  require(indices.stage() == first.stage(), "selection indices stage mismatch");
  ConditionalValue::ScalarData out(first.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::int64_t k = indices.integer(i);
    require(k >= 0 && static_cast<std::size_t>(k) < seq.size(),
            "selection index out of range on node ordinal " + std::to_string(i));
    out[i] = seq[static_cast<std::size_t>(k)].scalar(i);
  }
  return ConditionalValue::scalars(first.tree_ptr(), first.stage(), std::move(out));
}

namespace {

std::string first_scalar_mismatch(const ConditionalValue& lhs, const ConditionalValue& rhs) {
  if (lhs.payload() != Payload::Scalar || !lhs.same_shape_as(rhs)) return "shape mismatch";
  for (std::size_t i = 0; i < lhs.size(); ++i)
    if (lhs.scalar(i) != rhs.scalar(i))
      return "node ordinal " + std::to_string(i) + ": f(paste)=" + std::to_string(lhs.scalar(i)) +
             " paste(f)=" + std::to_string(rhs.scalar(i));
  return "mismatch";
}

}  // namespace

CheckReport check_stability(const StableFn& f, std::span<const ConditionalValue> battery,
                            std::span<const StagePartition> partitions) {
  CheckReport report;
  if (battery.empty() || partitions.empty()) {
    report.add("stability", false, "empty battery or partition list");
    return report;
  }
  std::size_t trial = 0;
  for (const StagePartition& partition : partitions) {
    // One part per block, drawn cyclically from the battery.
    std::vector<ConditionalValue> parts;
    for (std::size_t k = 0; k < partition.block_count(); ++k)
      parts.push_back(battery[(trial + k) % battery.size()]);
    ++trial;
    const std::string label = "stability trial " + std::to_string(trial);

    ConditionalValue pasted = concatenate(parts, partition);
    std::vector<ConditionalValue> mapped;
    ConditionalValue lhs = pasted;
    try {
      lhs = f(pasted);
      for (const auto& p : parts) mapped.push_back(f(p));
    } catch (const std::exception& e) {
      report.add(label, false, std::string("evaluation failure: ") + e.what());
      continue;
    }
    if (lhs.stage() < partition.stage()) {
      report.add(label, false, "f lowered the stage below the partition stage");
      continue;
    }
    ConditionalValue rhs = concatenate(mapped, partition);
    const bool ok = lhs.equals(rhs, 0.0);
    report.add(label, ok, ok ? std::string{} : first_scalar_mismatch(lhs, rhs));
  }
  return report;
}

}  // namespace treedp

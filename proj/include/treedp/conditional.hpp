#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "treedp/check_report.hpp"
#include "treedp/scenario_tree.hpp"

namespace treedp {

enum class Payload { Scalar, Vector, Integer };

/// A stage-t measurable random object: one payload per stage-t node, in
/// stable atom order. Scalar payloads are extended reals (±inf allowed),
/// vector payloads are finite reals with per-node dimension, integer
/// payloads carry the discrete metric. Immutable value type.
class ConditionalValue {
public:
  using ScalarData = std::vector<double>;
  using VectorData = std::vector<std::vector<double>>;
  using IntegerData = std::vector<std::int64_t>;

  static ConditionalValue scalars(TreePtr tree, int stage, ScalarData values);
  static ConditionalValue constant(TreePtr tree, int stage, double value);
  static ConditionalValue vectors(TreePtr tree, int stage, VectorData values);
  static ConditionalValue integers(TreePtr tree, int stage, IntegerData values);

  int stage() const { return stage_; }
  Payload payload() const { return payload_; }
  std::size_t size() const;
  const ScenarioTree& tree() const { return *tree_; }
  const TreePtr& tree_ptr() const { return tree_; }

  double scalar(std::size_t i) const { return std::get<ScalarData>(data_).at(i); }
  std::span<const double> vec(std::size_t i) const;
  std::int64_t integer(std::size_t i) const { return std::get<IntegerData>(data_).at(i); }
  std::size_t dim(std::size_t i) const { return vec(i).size(); }

  const ScalarData& scalar_data() const { return std::get<ScalarData>(data_); }
  const VectorData& vector_data() const { return std::get<VectorData>(data_); }
  const IntegerData& integer_data() const { return std::get<IntegerData>(data_); }

  ConditionalValue map_scalars(const std::function<double(double)>& f) const;

  bool same_shape_as(const ConditionalValue& other) const;
  bool equals(const ConditionalValue& other, double tol = 0.0) const;

private:
  ConditionalValue(TreePtr tree, int stage, Payload payload,
                   std::variant<ScalarData, VectorData, IntegerData> data);

  TreePtr tree_;
  int stage_ = 0;
  Payload payload_ = Payload::Scalar;
  std::variant<ScalarData, VectorData, IntegerData> data_;
};

/// The unique element agreeing with part k on every node of block k.
ConditionalValue concatenate(std::span<const ConditionalValue> parts,
                             const StagePartition& partition);

/// Nodewise distance: |x-y| for scalars, Euclidean for vectors, discrete
/// (0/1) for integers. Result is a nonnegative scalar-payload value.
ConditionalValue metric(const ConditionalValue& x, const ConditionalValue& y);

/// Nodewise max / min over a nonempty family of extended-real values.
ConditionalValue essential_sup(std::span<const ConditionalValue> values);
ConditionalValue essential_inf(std::span<const ConditionalValue> values);

/// E[x | F_t] for a finite scalar payload at a later stage; satisfies the
/// tower property by construction.
ConditionalValue conditional_expectation(const ConditionalValue& x, int stage);

/// Nodewise subsequence selection: result(node) = seq[indices(node)](node).
/// `indices` is an integer payload with entries in [0, seq.size()).
ConditionalValue select_subsequence(std::span<const ConditionalValue> seq,
                                    const ConditionalValue& indices);

using StableFn = std::function<ConditionalValue(const ConditionalValue&)>;

/// Tests f(paste(x_k)) == paste(f(x_k)) for every supplied partition, using
/// battery elements cyclically as the parts. Evaluation failures surface as
/// their own report entries rather than aborting the run.
CheckReport check_stability(const StableFn& f, std::span<const ConditionalValue> battery,
                            std::span<const StagePartition> partitions);

}  // namespace treedp

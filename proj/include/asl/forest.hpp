#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "asl/dataset.hpp"
#include "asl/knn.hpp"

namespace asl::classifiers {

using ClassCounts = std::array<std::uint32_t, kNumLabels>;

/// Binary axis-aligned tree stored as a flat node array; node 0 is the root.
/// An internal node sends x to `left` when x[feature] <= threshold.
class DecisionTree {
 public:
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    ClassCounts counts{};       // leaf histogram; unused on internal nodes

    bool is_leaf() const noexcept { return feature < 0; }
    friend bool operator==(const Node&, const Node&) = default;
  };

  DecisionTree() = default;
  /// Validates the structural invariants; throws std::invalid_argument otherwise.
  explicit DecisionTree(std::vector<Node> nodes);

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const Node& leaf_for(const FeatureVector& x) const;
  /// Majority class of the reached leaf; ties go to the alphabetically first label.
  Label predict(const FeatureVector& x) const;
  std::size_t depth() const;

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

 private:
  std::vector<Node> nodes_;
};

struct ForestParams {
  std::size_t max_features = 7;  // floor(sqrt(63))
  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

class ForestModel {
 public:
  ForestModel() = default;
  ForestModel(std::vector<DecisionTree> trees, std::uint64_t seed, ForestParams params = {});

  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
  std::size_t size() const noexcept { return trees_.size(); }
  std::uint64_t seed() const noexcept { return seed_; }
  const ForestParams& params() const noexcept { return params_; }

  ClassCounts votes(const FeatureVector& x) const;
  Label predict(const FeatureVector& x) const;

  friend bool operator==(const ForestModel&, const ForestModel&) = default;

 private:
  std::vector<DecisionTree> trees_;
  std::uint64_t seed_ = 0;
  ForestParams params_;
};

/// Grows tree `index` of a forest: bootstrap resample of |train| draws, then
/// greedy Gini splits over `max_features` random candidate features per node
/// until the node is pure or no candidate split lowers impurity. The tree
/// depends only on (train, seed, index), so forests grow incrementally.
DecisionTree grow_tree(const Dataset& train, std::uint64_t seed, std::size_t index,
                       const ForestParams& params = {});

/// Throws std::invalid_argument when n == 0 or train is empty.
ForestModel rf_fit(const Dataset& train, std::size_t n, std::uint64_t seed, const ForestParams& params = {});
Label rf_predict(const ForestModel& model, const FeatureVector& query);

/// Index of the largest count; ties go to the lowest (alphabetically first) label.
Label majority(const ClassCounts& counts) noexcept;

/// Trains one forest of n_max trees and scores every prefix of n_min..n_max trees.
SweepResult rf_sweep(const Dataset& train, const Dataset& validation, std::uint64_t seed,
                     std::size_t n_min = 1, std::size_t n_max = 200, const ForestParams& params = {});

}  // namespace asl::classifiers

#include "asl/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace asl::classifiers {

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double gini_sum(const ClassCounts& counts, double total) noexcept {
  // total * gini = total - sum(c^2)/total
  double sq = 0.0;
  for (auto c : counts) sq += static_cast<double>(c) * static_cast<double>(c);
  return total - sq / total;
}

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<FeatureVector>& x, const std::vector<Label>& y, std::mt19937_64& rng,
              std::size_t max_features)
      : x_(x), y_(y), rng_(rng), max_features_(std::min(max_features, kNumFeatures)) {}

  std::vector<DecisionTree::Node> build(std::vector<std::size_t> rows) {
    nodes_.clear();
    grow(rows.begin(), rows.end());
    return std::move(nodes_);
  }

 private:
  using Iter = std::vector<std::size_t>::iterator;

  struct Split {
    std::size_t feature = 0;
    double threshold = 0.0;
    double impurity = 0.0;  // weighted child impurity sum
    bool found = false;
  };

  std::int32_t grow(Iter begin, Iter end) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();

    ClassCounts counts{};
    for (auto it = begin; it != end; ++it) ++counts[y_[*it].index()];
    const double total = static_cast<double>(end - begin);
    const double parent = gini_sum(counts, total);

    Split split;
    if (parent > 1e-12) split = best_split(begin, end, parent);
    if (!split.found) {
      nodes_[static_cast<std::size_t>(id)].counts = counts;
      return id;
    }

    const auto mid = std::partition(begin, end, [&](std::size_t r) {
      return x_[r][split.feature] <= split.threshold;
    });
    const auto left = grow(begin, mid);
    const auto right = grow(mid, end);
    auto& node = nodes_[static_cast<std::size_t>(id)];
    node.feature = static_cast<std::int32_t>(split.feature);
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  Split best_split(Iter begin, Iter end, double parent) {
    // Partial Fisher-Yates picks the candidate features for this node.
    std::array<std::size_t, kNumFeatures> features{};
    std::iota(features.begin(), features.end(), std::size_t{0});
    for (std::size_t i = 0; i < max_features_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, kNumFeatures - 1);
      std::swap(features[i], features[pick(rng_)]);
    }

    const std::size_t n = static_cast<std::size_t>(end - begin);
    std::vector<std::pair<double, std::size_t>> column(n);
    Split best;
    best.impurity = parent - 1e-12;
    for (std::size_t fi = 0; fi < max_features_; ++fi) {
      const std::size_t f = features[fi];
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = begin[static_cast<std::ptrdiff_t>(i)];
        column[i] = {x_[r][f], y_[r].index()};
      }
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;

      ClassCounts left{};
      ClassCounts right{};
      for (const auto& [v, c] : column) ++right[c];
      double left_sq = 0.0, right_sq = 0.0;
      for (auto c : right) right_sq += static_cast<double>(c) * static_cast<double>(c);

      for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t c = column[i].second;
        // Incremental update of the sums of squared class counts.
        left_sq += 2.0 * static_cast<double>(left[c]) + 1.0;
        right_sq -= 2.0 * static_cast<double>(right[c]) - 1.0;
        ++left[c];
        --right[c];
        if (column[i].first == column[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = static_cast<double>(n - i - 1);
        const double impurity = (nl - left_sq / nl) + (nr - right_sq / nr);
        if (impurity < best.impurity) {
          best.impurity = impurity;
          best.feature = f;
          best.threshold = column[i].first + (column[i + 1].first - column[i].first) / 2.0;
          // Midpoint can round up onto the right value for adjacent doubles.
          if (!(best.threshold < column[i + 1].first)) best.threshold = column[i].first;
          best.found = true;
        }
      }
    }
    return best;
  }

  const std::vector<FeatureVector>& x_;
  const std::vector<Label>& y_;
  std::mt19937_64& rng_;
  std::size_t max_features_;
  std::vector<DecisionTree::Node> nodes_;
};

std::pair<std::vector<FeatureVector>, std::vector<Label>> unpack(const Dataset& ds) {
  std::pair<std::vector<FeatureVector>, std::vector<Label>> out;
  out.first.reserve(ds.size());
  out.second.reserve(ds.size());
  for (const auto& s : ds.samples) {
    out.first.push_back(frame_to_features(s.frame));
    out.second.push_back(s.label);
  }
  return out;
}

DecisionTree grow_tree_unpacked(const std::vector<FeatureVector>& x, const std::vector<Label>& y,
                                std::uint64_t seed, std::size_t index, const ForestParams& params) {
  std::mt19937_64 rng(splitmix64(seed ^ splitmix64(index + 1)));
  std::uniform_int_distribution<std::size_t> draw(0, x.size() - 1);
  std::vector<std::size_t> rows(x.size());
  for (auto& r : rows) r = draw(rng);
  TreeBuilder builder(x, y, rng, params.max_features);
  return DecisionTree(builder.build(std::move(rows)));
}

}  // namespace

Label majority(const ClassCounts& counts) noexcept {
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumLabels; ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return Label::from_index(best);
}

DecisionTree::DecisionTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw std::invalid_argument("decision tree needs at least one node");
  const auto n = static_cast<std::int32_t>(nodes_.size());
  for (std::int32_t i = 0; i < n; ++i) {
    const auto& node = nodes_[static_cast<std::size_t>(i)];
    if (node.is_leaf()) {
      std::uint64_t sum = 0;
      for (auto c : node.counts) sum += c;
      if (sum == 0) throw std::invalid_argument("decision tree leaf with an empty histogram");
    } else {
      if (node.feature >= static_cast<std::int32_t>(kNumFeatures) || !std::isfinite(node.threshold)) {
        throw std::invalid_argument("decision tree split feature out of range or threshold not finite");
      }
      if (node.left <= i || node.left >= n || node.right <= i || node.right >= n || node.left == node.right) {
        throw std::invalid_argument("decision tree child index must follow its parent and stay in range");
      }
    }
  }
}

const DecisionTree::Node& DecisionTree::leaf_for(const FeatureVector& x) const {
  const Node* node = &nodes_.front();
  // Children always follow their parent, which bounds the walk.
  for (std::size_t steps = 0; !node->is_leaf() && steps < nodes_.size(); ++steps) {
    const auto next = x[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left : node->right;
    node = &nodes_[static_cast<std::size_t>(next)];
  }
  return *node;
}

Label DecisionTree::predict(const FeatureVector& x) const { return majority(leaf_for(x).counts); }

std::size_t DecisionTree::depth() const {
  std::vector<std::size_t> level(nodes_.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    const auto& node = nodes_[i];
    if (!node.is_leaf()) {
      level[static_cast<std::size_t>(node.left)] = level[i] + 1;
      level[static_cast<std::size_t>(node.right)] = level[i] + 1;
    }
  }
  return deepest;
}

ForestModel::ForestModel(std::vector<DecisionTree> trees, std::uint64_t seed, ForestParams params)
    : trees_(std::move(trees)), seed_(seed), params_(params) {
  if (trees_.empty()) throw std::invalid_argument("forest needs at least one tree");
}

ClassCounts ForestModel::votes(const FeatureVector& x) const {
  ClassCounts counts{};
  for (const auto& tree : trees_) ++counts[tree.predict(x).index()];
  return counts;
}

Label ForestModel::predict(const FeatureVector& x) const { return majority(votes(x)); }

DecisionTree grow_tree(const Dataset& train, std::uint64_t seed, std::size_t index, const ForestParams& params) {
  if (train.empty()) throw std::invalid_argument("cannot grow a tree on an empty dataset");
  const auto [x, y] = unpack(train);
  return grow_tree_unpacked(x, y, seed, index, params);
}

ForestModel rf_fit(const Dataset& train, std::size_t n, std::uint64_t seed, const ForestParams& params) {
  if (n < 1) throw std::invalid_argument("forest size must be at least 1");
  if (train.empty()) throw std::invalid_argument("cannot fit a forest on an empty dataset");
  const auto [x, y] = unpack(train);
  std::vector<DecisionTree> trees;
  trees.reserve(n);
  for (std::size_t i = 0; i < n; ++i) trees.push_back(grow_tree_unpacked(x, y, seed, i, params));
  return ForestModel(std::move(trees), seed, params);
}

Label rf_predict(const ForestModel& model, const FeatureVector& query) { return model.predict(query); }

SweepResult rf_sweep(const Dataset& train, const Dataset& validation, std::uint64_t seed, std::size_t n_min,
                     std::size_t n_max, const ForestParams& params) {
  if (train.empty() || validation.empty()) throw std::invalid_argument("forest sweep needs non-empty datasets");
  if (n_min < 1 || n_min > n_max) throw std::invalid_argument("invalid tree-count range");

  const auto [x, y] = unpack(train);
  std::vector<FeatureVector> queries;
  queries.reserve(validation.size());
  for (const auto& s : validation.samples) queries.push_back(frame_to_features(s.frame));

  std::vector<ClassCounts> votes(validation.size(), ClassCounts{});
  std::vector<std::size_t> correct(n_max - n_min + 1, 0);
  for (std::size_t t = 0; t < n_max; ++t) {
    const DecisionTree tree = grow_tree_unpacked(x, y, seed, t, params);
    for (std::size_t q = 0; q < queries.size(); ++q) {
      ++votes[q][tree.predict(queries[q]).index()];
      if (t + 1 >= n_min && majority(votes[q]) == validation.samples[q].label) ++correct[t + 1 - n_min];
    }
  }

  SweepResult result;
  result.first = n_min;
  std::size_t best = 0;
  for (std::size_t i = 0; i < correct.size(); ++i) {
    result.accuracies.push_back(static_cast<double>(correct[i]) / static_cast<double>(validation.size()));
    if (correct[i] > correct[best]) best = i;
  }
  result.best = n_min + best;
  return result;
}

}  // namespace asl::classifiers

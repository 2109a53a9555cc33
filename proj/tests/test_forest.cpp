#include <doctest.h>

#include <numeric>
#include <random>

#include "asl/forest.hpp"

using namespace asl;
using namespace asl::classifiers;

namespace {

using Node = DecisionTree::Node;

Node leaf(std::initializer_list<std::pair<char, std::uint32_t>> counts) {
  Node n;
  for (const auto& [c, k] : counts) n.counts[Label::from_char(c).index()] = k;
  return n;
}

Node split(int feature, double threshold, int left, int right) {
  Node n;
  n.feature = feature;
  n.threshold = threshold;
  n.left = left;
  n.right = right;
  return n;
}

FeatureVector with(std::size_t feature, double value) {
  FeatureVector x{};
  x[feature] = value;
  return x;
}

Dataset clustered(std::uint64_t seed, std::size_t per_class, std::size_t classes) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Dataset ds;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      HandFrame f;
      for (std::size_t p = 0; p < kNumPoints; ++p) {
        f.points[p] = {3.0 * double((c + p) % 5) + n(rng), 2.0 * double((c * 7 + p) % 3) + n(rng), n(rng)};
      }
      ds.samples.push_back({f, Label::from_index(c)});
    }
  }
  return ds;
}

}  // namespace

TEST_CASE("hand-built three-node tree routes like a manual trace") {
  // x[4] <= 2.5 -> leaf {a:3, b:1}; otherwise leaf {b:2, c:2}
  const DecisionTree tree({split(4, 2.5, 1, 2), leaf({{'a', 3}, {'b', 1}}), leaf({{'b', 2}, {'c', 2}})});
  CHECK(tree.depth() == 1);
  CHECK(tree.predict(with(4, 2.5)).letter() == 'a');  // equality goes left
  CHECK(tree.predict(with(4, -10)).letter() == 'a');
  CHECK(tree.predict(with(4, 2.5000001)).letter() == 'b');  // b/c tie -> alphabetical
  CHECK(&tree.leaf_for(with(4, 100)) == &tree.nodes()[2]);
  CHECK(&tree.leaf_for(with(3, 100)) == &tree.nodes()[1]);  // other features ignored
}

TEST_CASE("single-leaf tree always answers its majority") {
  const DecisionTree tree({leaf({{'h', 1}, {'p', 4}})});
  CHECK(tree.depth() == 0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int t = 0; t < 50; ++t) {
    FeatureVector x;
    for (auto& v : x) v = u(rng);
    CHECK(tree.predict(x).letter() == 'p');
  }
}

TEST_CASE("tree validation rejects malformed structure") {
  CHECK_THROWS_AS(DecisionTree(std::vector<Node>{}), std::invalid_argument);
  CHECK_THROWS_AS(DecisionTree({Node{}}), std::invalid_argument);  // empty histogram
  CHECK_THROWS_AS(DecisionTree({split(0, 0.0, 1, 5), leaf({{'a', 1}})}), std::invalid_argument);
  CHECK_THROWS_AS(DecisionTree({split(63, 0.0, 1, 2), leaf({{'a', 1}}), leaf({{'b', 1}})}), std::invalid_argument);
  CHECK_THROWS_AS(DecisionTree({split(0, 0.0, 1, 2), split(0, 0.0, 0, 2), leaf({{'b', 1}})}), std::invalid_argument);
  CHECK_THROWS_AS(DecisionTree({split(0, 0.0, 1, 1), leaf({{'a', 1}})}), std::invalid_argument);
  CHECK_THROWS_AS(DecisionTree({split(0, std::nan(""), 1, 2), leaf({{'a', 1}}), leaf({{'b', 1}})}),
                  std::invalid_argument);
}

TEST_CASE("majority vote and its tie rule") {
  ClassCounts c{};
  c[Label::from_char('c').index()] = 2;
  c[Label::from_char('b').index()] = 2;
  CHECK(majority(c).letter() == 'b');
  c[Label::from_char('y').index()] = 3;
  CHECK(majority(c).letter() == 'y');
  CHECK(majority(ClassCounts{}).letter() == 'a');
}

TEST_CASE("three trees voting a, a, b give a") {
  const DecisionTree a({leaf({{'a', 1}})});
  const DecisionTree b({leaf({{'b', 5}})});
  const ForestModel forest({a, b, a}, 0);
  CHECK(rf_predict(forest, FeatureVector{}).letter() == 'a');
  const auto v = forest.votes(FeatureVector{});
  CHECK(v[0] == 2);
  CHECK(v[1] == 1);
  const ForestModel tied({b, a}, 0);
  CHECK(rf_predict(tied, FeatureVector{}).letter() == 'a');
}

TEST_CASE("rf_fit validates its inputs") {
  const Dataset ds = clustered(1, 3, 2);
  CHECK_THROWS_AS(rf_fit(ds, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(rf_fit(Dataset{}, 3, 1), std::invalid_argument);
}

TEST_CASE("forests are bit-reproducible given (train, n, seed)") {
  const Dataset ds = clustered(2, 10, 4);
  const auto f1 = rf_fit(ds, 8, 99);
  const auto f2 = rf_fit(ds, 8, 99);
  CHECK(f1 == f2);
  CHECK_FALSE(rf_fit(ds, 8, 100) == f1);
  const auto probe = clustered(3, 5, 4);
  for (const auto& s : probe.samples) {
    const auto x = frame_to_features(s.frame);
    CHECK(rf_predict(f1, x) == rf_predict(f2, x));
    CHECK(rf_predict(f1, x) == rf_predict(f1, x));
  }
}

TEST_CASE("a smaller forest is a prefix of a larger one") {
  const Dataset ds = clustered(4, 8, 3);
  const auto big = rf_fit(ds, 30, 7);
  for (std::size_t n : {1u, 5u, 17u}) {
    const auto small = rf_fit(ds, n, 7);
    REQUIRE(small.size() == n);
    for (std::size_t t = 0; t < n; ++t) CHECK(small.trees()[t] == big.trees()[t]);
  }
  CHECK(grow_tree(ds, 7, 12) == big.trees()[12]);
}

TEST_CASE("property: grown trees hold exactly one bootstrap resample") {
  const Dataset ds = clustered(5, 6, 5);
  for (std::size_t t = 0; t < 25; ++t) {
    const auto tree = grow_tree(ds, 11, t);
    std::uint64_t total = 0;
    for (const auto& node : tree.nodes()) {
      if (node.is_leaf()) total += std::accumulate(node.counts.begin(), node.counts.end(), std::uint64_t{0});
    }
    CHECK(total == ds.size());
  }
}

TEST_CASE("one tree separates two samples whenever both enter its bootstrap") {
  // The samples differ in every feature, so any candidate subset can split them.
  HandFrame lo, hi;
  for (std::size_t p = 0; p < kNumPoints; ++p) hi.points[p] = {1.0, 1.0, 1.0};
  const Dataset ds{{{lo, Label::from_char('d')}, {hi, Label::from_char('u')}}};
  int both_drawn = 0;
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    const auto forest = rf_fit(ds, 1, seed);
    const bool split_made = forest.trees()[0].nodes().size() > 1;
    const bool both_right = rf_predict(forest, frame_to_features(lo)).letter() == 'd' &&
                            rf_predict(forest, frame_to_features(hi)).letter() == 'u';
    CHECK(split_made == both_right);
    both_drawn += split_made;
  }
  CHECK(both_drawn > 0);
  CHECK(both_drawn < 64);
}

TEST_CASE("fully grown trees fit their bootstrap exactly") {
  const Dataset ds = clustered(6, 10, 6);
  const auto tree = grow_tree(ds, 3, 0);
  for (const auto& node : tree.nodes()) {
    if (!node.is_leaf()) continue;
    int classes = 0;
    for (auto c : node.counts) classes += c > 0;
    // Distinct continuous vectors are always separable, so leaves are pure.
    CHECK(classes == 1);
  }
}

TEST_CASE("forest sweep matches standalone forests of each size") {
  const Dataset train = clustered(7, 6, 4);
  const Dataset val = clustered(8, 4, 4);
  const auto r = rf_sweep(train, val, 5, 1, 12);
  REQUIRE(r.accuracies.size() == 12);
  for (std::size_t n = 1; n <= 12; ++n) {
    const auto f = rf_fit(train, n, 5);
    std::size_t correct = 0;
    for (const auto& s : val.samples) correct += rf_predict(f, frame_to_features(s.frame)) == s.label;
    CHECK(r.accuracies[n - 1] == double(correct) / double(val.size()));
  }
  const double top = *std::max_element(r.accuracies.begin(), r.accuracies.end());
  CHECK(r.accuracies[r.best - 1] == top);
  for (std::size_t n = 1; n < r.best; ++n) CHECK(r.accuracies[n - 1] < top);

  const auto full = rf_sweep(clustered(9, 2, 3), clustered(10, 1, 3), 1);
  CHECK(full.accuracies.size() == 200);
  CHECK(full.first == 1);
}

#include "asl/knn.hpp"

#include <algorithm>
#include <iostream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace asl::classifiers {

double squared_distance(const FeatureVector& a, const FeatureVector& b) noexcept {
  double sum = 0.0;
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

namespace {

struct Neighbor {
  double dist;
  std::size_t index;
  bool operator<(const Neighbor& o) const noexcept {
    return dist < o.dist || (dist == o.dist && index < o.index);
  }
};

std::vector<Neighbor> ranked_neighbors(const std::vector<FeatureVector>& features,
                                       const FeatureVector& query, std::size_t count) {
  std::vector<Neighbor> all(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) all[i] = {squared_distance(features[i], query), i};
  count = std::min(count, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count), all.end());
  all.resize(count);
  return all;
}

/// Running vote over a growing prefix of ranked neighbors.
class Vote {
 public:
  void add(Label label, double dist) {
    const auto c = label.index();
    if (counts_[c]++ == 0) nearest_[c] = dist;
  }

  Label winner() const {
    std::size_t best = 0;
    for (std::size_t c = 1; c < kNumLabels; ++c) {
      if (counts_[c] > counts_[best] ||
          (counts_[c] == counts_[best] && counts_[c] > 0 && nearest_[c] < nearest_[best])) {
        best = c;
      }
    }
    return Label::from_index(best);
  }

 private:
  std::array<std::size_t, kNumLabels> counts_{};
  std::array<double, kNumLabels> nearest_{};
};

}  // namespace

KnnModel::KnnModel(std::size_t k, std::vector<FeatureVector> features, std::vector<Label> labels)
    : k_(k), features_(std::move(features)), labels_(std::move(labels)) {
  if (features_.empty()) throw std::invalid_argument("kNN needs at least one training sample");
  if (features_.size() != labels_.size()) throw std::invalid_argument("kNN features/labels length mismatch");
  if (k_ < 1 || k_ > features_.size()) {
    throw std::invalid_argument("k=" + std::to_string(k_) + " outside [1, " +
                                std::to_string(features_.size()) + "]");
  }
}

Label KnnModel::predict(const FeatureVector& query) const {
  Vote vote;
  for (const auto& n : ranked_neighbors(features_, query, k_)) vote.add(labels_[n.index], n.dist);
  return vote.winner();
}

KnnModel knn_fit(const Dataset& train, std::size_t k) {
  std::vector<FeatureVector> features;
  std::vector<Label> labels;
  features.reserve(train.size());
  labels.reserve(train.size());
  for (const auto& s : train.samples) {
    features.push_back(frame_to_features(s.frame));
    labels.push_back(s.label);
  }
  return KnnModel(k, std::move(features), std::move(labels));
}

Label knn_predict(const KnnModel& model, const FeatureVector& query) { return model.predict(query); }

SweepResult knn_sweep(const Dataset& train, const Dataset& validation, std::size_t k_min,
                      std::size_t k_max) {
  if (train.empty() || validation.empty()) throw std::invalid_argument("kNN sweep needs non-empty datasets");
  if (k_min < 1 || k_min > k_max) throw std::invalid_argument("invalid k range");

  SweepResult result;
  result.first = k_min;
  if (k_max > train.size()) {
    std::clog << "warning: k range [" << k_min << ", " << k_max << "] truncated to " << train.size()
              << " (training set size)\n";
    k_max = train.size();
    result.truncated = true;
    if (k_min > k_max) throw std::invalid_argument("k range lies entirely above the training set size");
  }

  // A single full ranking per query serves every k in the range.
  const KnnModel store = knn_fit(train, 1);
  std::vector<std::size_t> correct(k_max - k_min + 1, 0);
  for (const auto& s : validation.samples) {
    const auto ranked = ranked_neighbors(store.features(), frame_to_features(s.frame), k_max);
    Vote vote;
    for (std::size_t k = 1; k <= k_max; ++k) {
      vote.add(store.labels()[ranked[k - 1].index], ranked[k - 1].dist);
      if (k >= k_min && vote.winner() == s.label) ++correct[k - k_min];
    }
  }

  result.accuracies.reserve(correct.size());
  std::size_t best = 0;
  for (std::size_t i = 0; i < correct.size(); ++i) {
    result.accuracies.push_back(static_cast<double>(correct[i]) / static_cast<double>(validation.size()));
    if (correct[i] > correct[best]) best = i;
  }
  result.best = k_min + best;
  return result;
}

}  // namespace asl::classifiers

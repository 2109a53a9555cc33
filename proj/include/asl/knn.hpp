#pragma once

#include <cstddef>
#include <vector>

#include "asl/dataset.hpp"

namespace asl::classifiers {

/// Lazy learner: keeps every training vector and votes among the k nearest
/// (Euclidean) at query time.
///
/// Neighbors are ordered by (distance, training index). A vote tie goes to the
/// tied class whose closest neighbor is nearest; equal distances fall back to
/// alphabetical order.
class KnnModel {
 public:
  KnnModel(std::size_t k, std::vector<FeatureVector> features, std::vector<Label> labels);

  std::size_t k() const noexcept { return k_; }
  const std::vector<FeatureVector>& features() const noexcept { return features_; }
  const std::vector<Label>& labels() const noexcept { return labels_; }

  Label predict(const FeatureVector& query) const;

 private:
  std::size_t k_;
  std::vector<FeatureVector> features_;
  std::vector<Label> labels_;
};

/// Throws std::invalid_argument unless 1 <= k <= |train|.
KnnModel knn_fit(const Dataset& train, std::size_t k);
Label knn_predict(const KnnModel& model, const FeatureVector& query);

struct SweepResult {
  std::size_t best = 0;             // smallest hyperparameter reaching the top accuracy
  std::vector<double> accuracies;   // accuracies[i] belongs to hyperparameter first + i
  std::size_t first = 1;
  bool truncated = false;           // requested upper bound exceeded what the data allows
};

/// Evaluates every k in [k_min, k_max] on `validation`. An upper bound larger
/// than |train| is truncated and flagged.
SweepResult knn_sweep(const Dataset& train, const Dataset& validation, std::size_t k_min = 1,
                      std::size_t k_max = 25);

double squared_distance(const FeatureVector& a, const FeatureVector& b) noexcept;

}  // namespace asl::classifiers

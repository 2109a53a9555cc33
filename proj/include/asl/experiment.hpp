#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "asl/dataset.hpp"
#include "asl/mlp.hpp"
#include "asl/preprocess.hpp"

namespace asl::experiment {

enum class AlgorithmKind { Knn, RandomForest, NeuralNetwork };

inline constexpr std::array<AlgorithmKind, 3> kAllAlgorithms{AlgorithmKind::Knn, AlgorithmKind::RandomForest,
                                                             AlgorithmKind::NeuralNetwork};

std::string_view to_string(AlgorithmKind kind) noexcept;  // "knn", "rf", "mlp"
std::string_view display_name(AlgorithmKind kind) noexcept;  // "kNN", "Random Forest", "Neural Network"
/// Accepts the short names and a few aliases; throws std::invalid_argument otherwise.
AlgorithmKind parse_algorithm(std::string_view text);

/// 24x24 counts, rows = true label, columns = predicted label, alphabetical order.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumLabels>, kNumLabels> counts{};

  std::uint64_t total() const noexcept;
  std::uint64_t trace() const noexcept;
  void add(Label truth, Label predicted) noexcept { ++counts[truth.index()][predicted.index()]; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct Evaluation {
  double accuracy = 0.0;
  ConfusionMatrix confusion;
};

using Predictor = std::function<Label(const FeatureVector&)>;

/// Throws std::invalid_argument on an empty test set.
Evaluation evaluate(const Predictor& predict, const Dataset& test);

/// Row-wise recall; rows without samples are std::nullopt.
std::array<std::optional<double>, kNumLabels> per_class_accuracy(const ConfusionMatrix& cm);

enum class ConfusionFormat { Csv, Json };
std::string export_confusion(const ConfusionMatrix& cm, ConfusionFormat format);
/// Inverse of export_confusion for either format; throws std::invalid_argument on malformed input.
ConfusionMatrix import_confusion(std::string_view text, ConfusionFormat format);

struct GridResult {
  preprocess::PipelineSpec spec;
  AlgorithmKind algorithm = AlgorithmKind::Knn;
  std::optional<std::size_t> hyperparameter;  // chosen k or n; empty for the network
  double accuracy = 0.0;
  ConfusionMatrix confusion;
  std::optional<classifiers::TrainingCurves> curves;
  std::vector<double> sweep;                  // accuracy per k / n when swept
  std::optional<std::string> error;           // set when the cell failed

  bool failed() const noexcept { return error.has_value(); }
};

struct RunReport {
  std::vector<GridResult> results;
  std::uint64_t split_seed = 0;
  std::string dataset_fingerprint;
  std::vector<std::pair<AlgorithmKind, double>> averages;  // mean accuracy over successful cells

  const GridResult* find(const preprocess::PipelineSpec& spec, AlgorithmKind algo) const;
};

struct GridOptions {
  double split_ratio = 0.8;
  std::uint64_t seed = 0;
  /// Carve this fraction of the train split off for hyperparameter selection;
  /// 0 selects on the test split (best-of-sweep test accuracy).
  double holdout = 0.0;
  std::size_t k_max = 25;
  std::size_t n_max = 200;
  std::vector<std::size_t> mlp_widths = classifiers::default_mlp_widths();
  classifiers::TrainConfig train;  // seed is replaced by the per-cell seed
  std::size_t threads = 0;          // 0 = hardware concurrency
};

/// Seed for one grid cell: mixes the grid seed, the canonical spec string and
/// the algorithm. The box kind is left out when no step uses it.
std::uint64_t cell_seed(std::uint64_t grid_seed, const preprocess::PipelineSpec& spec, AlgorithmKind algo);

/// Runs every (spec, algorithm) cell on one shared split. Results are ordered
/// spec-major then by algorithm and do not depend on the thread count.
RunReport run_grid(const Dataset& ds, const std::vector<preprocess::PipelineSpec>& specs,
                   const std::vector<AlgorithmKind>& algos, const GridOptions& options);

enum class TableFormat { Markdown, Csv };
/// One row per step sequence, columns kNN/RF/NN under Cuboidal then Cubical.
/// Percentages carry 2 fraction digits; missing or failed cells render as "—".
std::string render_table(const RunReport& report, TableFormat format);

/// "spec,algorithm,epoch,loss,accuracy" rows for every cell with curves.
std::string export_curves(const RunReport& report);

std::string format_percent(double fraction);

}  // namespace asl::experiment

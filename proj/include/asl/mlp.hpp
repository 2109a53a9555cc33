#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "asl/dataset.hpp"

namespace asl::classifiers {

/// One fully-connected layer: out = W * in + b.
struct DenseLayer {
  Eigen::MatrixXd weights;  // rows = outputs, cols = inputs
  Eigen::VectorXd bias;

  friend bool operator==(const DenseLayer& a, const DenseLayer& b) {
    return a.weights.rows() == b.weights.rows() && a.weights.cols() == b.weights.cols() &&
           a.bias.size() == b.bias.size() && a.weights == b.weights && a.bias == b.bias;
  }
};

/// Default stack: 63 inputs, eight rectifier layers, 24-way softmax output.
std::vector<std::size_t> default_mlp_widths();

/// Dense network with rectifier hidden layers and a softmax output layer.
/// The layer shapes must chain; any widths are accepted here so small
/// hand-built networks can be evaluated. mlp_init() enforces the 63 -> 8 hidden -> 24 shape.
class MlpModel {
 public:
  MlpModel() = default;
  explicit MlpModel(std::vector<DenseLayer> layers);

  /// All weights and biases zero (softmax output is then uniform).
  static MlpModel zeros(const std::vector<std::size_t>& widths);
  /// Uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases. Any widths.
  static MlpModel random(const std::vector<std::size_t>& widths, std::uint64_t seed);

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  std::vector<std::size_t> widths() const;
  std::size_t parameter_count() const noexcept;
  bool finite() const;

  /// Column-wise forward pass over a batch (inputs x batch). Returns probabilities (outputs x batch).
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const;
  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;

  friend bool operator==(const MlpModel&, const MlpModel&) = default;

 private:
  std::vector<DenseLayer> layers_;
};

/// Throws std::invalid_argument unless widths run 63 -> (8 hidden) -> 24.
MlpModel mlp_init(const std::vector<std::size_t>& widths, std::uint64_t seed);
std::vector<double> mlp_forward(const MlpModel& model, const FeatureVector& x);
/// Argmax of the output distribution; ties go to the lower class index.
Label mlp_predict(const MlpModel& model, const FeatureVector& x);

inline constexpr double kProbabilityFloor = 1e-12;

/// Categorical cross-entropy -log(max(p[target], 1e-12)).
double mlp_loss(const std::vector<double>& probs, Label target);
double cross_entropy(double target_probability) noexcept;

/// Max-subtracted softmax over each column.
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits);

struct TrainConfig {
  std::size_t epochs = 128;
  std::size_t batch_size = 32;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainingCurves {
  std::vector<double> loss;      // mean training loss per epoch
  std::vector<double> accuracy;  // training accuracy per epoch
};

struct TrainResult {
  MlpModel model;
  TrainingCurves curves;
};

/// Mini-batch Adam on categorical cross-entropy with a seeded shuffle each
/// epoch. Per-epoch loss and accuracy are accumulated over the batches as
/// they are processed (before each batch's update).
TrainResult mlp_train(MlpModel model, const Dataset& train, const TrainConfig& cfg);

/// Parameter gradients of the mean cross-entropy over a batch, layer by layer.
std::vector<DenseLayer> mlp_gradients(const MlpModel& model, const Eigen::MatrixXd& inputs,
                                      const std::vector<std::size_t>& targets);

struct GradientCheckOptions {
  double step = 1e-5;
  /// Absolute magnitude below which both gradients count as zero.
  double zero_tolerance = 1e-8;
  /// Test hook: multiply the analytic gradient by this factor before comparing.
  double corrupt_factor = 1.0;
};

/// Max relative error |a - n| / max(|a|, |n|) between analytic gradients and
/// central finite differences of mlp_loss(mlp_forward(.)), over all parameters.
double gradient_check(const MlpModel& model, const Sample& sample, const GradientCheckOptions& options = {});
/// Same check for an arbitrary input vector and target class index.
double gradient_check(const MlpModel& model, const Eigen::VectorXd& input, std::size_t target,
                      const GradientCheckOptions& options = {});

Eigen::VectorXd to_eigen(const FeatureVector& x);

}  // namespace asl::classifiers

#include "asl/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace asl::classifiers {

std::vector<std::size_t> default_mlp_widths() { return {63, 256, 128, 128, 64, 64, 32, 32, 32, 24}; }

MlpModel::MlpModel(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw std::invalid_argument("network needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weights.rows() == 0 || layer.weights.cols() == 0) {
      throw std::invalid_argument("layer " + std::to_string(l + 1) + " has an empty weight matrix");
    }
    if (layer.bias.size() != layer.weights.rows()) {
      throw std::invalid_argument("layer " + std::to_string(l + 1) + " bias length does not match its outputs");
    }
    if (l > 0 && layer.weights.cols() != layers_[l - 1].weights.rows()) {
      throw std::invalid_argument("layer " + std::to_string(l + 1) + " input width does not chain");
    }
  }
}

namespace {

void check_widths(const std::vector<std::size_t>& widths) {
  if (widths.size() < 2) throw std::invalid_argument("network needs at least an input and an output width");
  for (auto w : widths) {
    if (w == 0) throw std::invalid_argument("layer widths must be positive");
  }
}

}  // namespace

MlpModel MlpModel::zeros(const std::vector<std::size_t>& widths) {
  check_widths(widths);
  std::vector<DenseLayer> layers;
  for (std::size_t l = 1; l < widths.size(); ++l) {
    const auto out = static_cast<Eigen::Index>(widths[l]);
    const auto in = static_cast<Eigen::Index>(widths[l - 1]);
    layers.push_back({Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)});
  }
  return MlpModel(std::move(layers));
}

MlpModel MlpModel::random(const std::vector<std::size_t>& widths, std::uint64_t seed) {
  MlpModel model = zeros(widths);
  std::mt19937_64 rng(seed);
  for (auto& layer : model.layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.weights.rows() + layer.weights.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    // Column-major fill order is part of the reproducibility contract.
    for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) {
      for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) layer.weights(i, j) = dist(rng);
    }
  }
  return model;
}

std::vector<std::size_t> MlpModel::widths() const {
  std::vector<std::size_t> out;
  if (layers_.empty()) return out;
  out.push_back(static_cast<std::size_t>(layers_.front().weights.cols()));
  for (const auto& layer : layers_) out.push_back(static_cast<std::size_t>(layer.weights.rows()));
  return out;
}

std::size_t MlpModel::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
  return n;
}

bool MlpModel::finite() const {
  return std::all_of(layers_.begin(), layers_.end(),
                     [](const DenseLayer& l) { return l.weights.allFinite() && l.bias.allFinite(); });
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double peak = logits.col(j).maxCoeff();
    out.col(j) = (logits.col(j).array() - peak).exp().matrix();
    out.col(j) /= out.col(j).sum();
  }
  return out;
}

Eigen::MatrixXd MlpModel::forward(const Eigen::MatrixXd& inputs) const {
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weights * a;
    z.colwise() += layers_[l].bias;
    a = l + 1 < layers_.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : softmax_columns(z);
  }
  return a;
}

Eigen::VectorXd MlpModel::forward(const Eigen::VectorXd& input) const {
  return forward(Eigen::MatrixXd(input)).col(0);
}

MlpModel mlp_init(const std::vector<std::size_t>& widths, std::uint64_t seed) {
  if (widths.size() != 10) {
    throw std::invalid_argument("expected 10 widths (input, 8 hidden, output), got " + std::to_string(widths.size()));
  }
  if (widths.front() != kNumFeatures) {
    throw std::invalid_argument("input width must be " + std::to_string(kNumFeatures));
  }
  if (widths.back() != kNumLabels) {
    throw std::invalid_argument("output width must be " + std::to_string(kNumLabels));
  }
  return MlpModel::random(widths, seed);
}

Eigen::VectorXd to_eigen(const FeatureVector& x) {
  return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

std::vector<double> mlp_forward(const MlpModel& model, const FeatureVector& x) {
  const Eigen::VectorXd p = model.forward(to_eigen(x));
  return {p.data(), p.data() + p.size()};
}

Label mlp_predict(const MlpModel& model, const FeatureVector& x) {
  const auto p = mlp_forward(model, x);
  const auto best = std::max_element(p.begin(), p.end()) - p.begin();
  return Label::from_index(static_cast<std::size_t>(best));
}

double cross_entropy(double target_probability) noexcept {
  return -std::log(std::max(target_probability, kProbabilityFloor));
}

double mlp_loss(const std::vector<double>& probs, Label target) {
  if (target.index() >= probs.size()) throw std::invalid_argument("target outside the probability vector");
  return cross_entropy(probs[target.index()]);
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("moment decay rates must lie in (0, 1)");
  }
  if (!(learning_rate >= 0.0) || !(epsilon > 0.0)) throw std::invalid_argument("invalid step size or epsilon");
}

namespace {

struct ForwardTrace {
  std::vector<Eigen::MatrixXd> activations;  // activations[0] = input, last = probabilities
  std::vector<Eigen::MatrixXd> preacts;
};

ForwardTrace forward_trace(const MlpModel& model, const Eigen::MatrixXd& inputs) {
  const auto& layers = model.layers();
  ForwardTrace t;
  t.activations.reserve(layers.size() + 1);
  t.preacts.reserve(layers.size());
  t.activations.push_back(inputs);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd z = layers[l].weights * t.activations.back();
    z.colwise() += layers[l].bias;
    t.activations.push_back(l + 1 < layers.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : softmax_columns(z));
    t.preacts.push_back(std::move(z));
  }
  return t;
}

// Gradient of the batch-mean cross-entropy. The softmax/cross-entropy pair
// gives dL/dz = p - onehot at the output.
std::vector<DenseLayer> backward(const MlpModel& model, const ForwardTrace& t, const std::vector<std::size_t>& targets) {
  const auto& layers = model.layers();
  const auto batch = static_cast<double>(targets.size());
  Eigen::MatrixXd delta = t.activations.back();
  for (std::size_t j = 0; j < targets.size(); ++j) delta(static_cast<Eigen::Index>(targets[j]), static_cast<Eigen::Index>(j)) -= 1.0;
  delta /= batch;

  std::vector<DenseLayer> grads(layers.size());
  for (std::size_t l = layers.size(); l-- > 0;) {
    grads[l].weights = delta * t.activations[l].transpose();
    grads[l].bias = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = layers[l].weights.transpose() * delta;
      delta = back.cwiseProduct((t.preacts[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return grads;
}

}  // namespace

std::vector<DenseLayer> mlp_gradients(const MlpModel& model, const Eigen::MatrixXd& inputs,
                                      const std::vector<std::size_t>& targets) {
  if (static_cast<std::size_t>(inputs.cols()) != targets.size()) {
    throw std::invalid_argument("one target per input column required");
  }
  return backward(model, forward_trace(model, inputs), targets);
}

TrainResult mlp_train(MlpModel model, const Dataset& train, const TrainConfig& cfg) {
  cfg.validate();
  TrainResult result;
  if (cfg.epochs == 0 || train.empty()) {
    result.model = std::move(model);
    return result;
  }
  const auto widths = model.widths();
  if (widths.front() != kNumFeatures || widths.back() != kNumLabels) {
    throw std::invalid_argument("network shape does not match 63 inputs / 24 classes");
  }

  const auto n = static_cast<Eigen::Index>(train.size());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(kNumFeatures), n);
  std::vector<std::size_t> y(train.size());
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& s = train.samples[static_cast<std::size_t>(j)];
    x.col(j) = to_eigen(frame_to_features(s.frame));
    y[static_cast<std::size_t>(j)] = s.label.index();
  }

  auto& layers = model.layers();
  std::vector<DenseLayer> m1(layers.size()), m2(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    m1[l] = m2[l] = {Eigen::MatrixXd::Zero(layers[l].weights.rows(), layers[l].weights.cols()),
                     Eigen::VectorXd::Zero(layers[l].bias.size())};
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::uint64_t step = 0;
  const double b1 = cfg.beta1, b2 = cfg.beta2;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i);
      std::swap(order[i], order[pick(rng)]);
    }

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      Eigen::MatrixXd xb(x.rows(), static_cast<Eigen::Index>(count));
      std::vector<std::size_t> yb(count);
      for (std::size_t j = 0; j < count; ++j) {
        xb.col(static_cast<Eigen::Index>(j)) = x.col(static_cast<Eigen::Index>(order[start + j]));
        yb[j] = y[order[start + j]];
      }

      const ForwardTrace trace = forward_trace(model, xb);
      const auto& probs = trace.activations.back();
      for (std::size_t j = 0; j < count; ++j) {
        const auto col = static_cast<Eigen::Index>(j);
        loss_sum += cross_entropy(probs(static_cast<Eigen::Index>(yb[j]), col));
        Eigen::Index arg = 0;
        probs.col(col).maxCoeff(&arg);
        if (static_cast<std::size_t>(arg) == yb[j]) ++correct;
      }

      const auto grads = backward(model, trace, yb);
      ++step;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
      const double lr = cfg.learning_rate;
      const double eps = cfg.epsilon;
      auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
        param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
      };
      for (std::size_t l = 0; l < layers.size(); ++l) {
        update(layers[l].weights, m1[l].weights, m2[l].weights, grads[l].weights);
        update(layers[l].bias, m1[l].bias, m2[l].bias, grads[l].bias);
      }
    }
    result.curves.loss.push_back(loss_sum / static_cast<double>(train.size()));
    result.curves.accuracy.push_back(static_cast<double>(correct) / static_cast<double>(train.size()));
  }
  result.model = std::move(model);
  return result;
}

double gradient_check(const MlpModel& model, const Eigen::VectorXd& input, std::size_t target,
                      const GradientCheckOptions& options) {
  const auto analytic = mlp_gradients(model, Eigen::MatrixXd(input), {target});
  auto loss_of = [&](const MlpModel& m) { return cross_entropy(m.forward(input)(static_cast<Eigen::Index>(target))); };

  MlpModel probe = model;
  double worst = 0.0;
  auto compare = [&](double& param, double grad) {
    const double saved = param;
    param = saved + options.step;
    const double up = loss_of(probe);
    param = saved - options.step;
    const double down = loss_of(probe);
    param = saved;
    const double numeric = (up - down) / (2.0 * options.step);
    const double a = grad * options.corrupt_factor;
    const double scale = std::max(std::abs(a), std::abs(numeric));
    if (scale < options.zero_tolerance) return;
    worst = std::max(worst, std::abs(a - numeric) / scale);
  };

  for (std::size_t l = 0; l < probe.layers().size(); ++l) {
    auto& layer = probe.layers()[l];
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) compare(layer.weights(i, j), analytic[l].weights(i, j));
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) compare(layer.bias(i), analytic[l].bias(i));
  }
  return worst;
}

double gradient_check(const MlpModel& model, const Sample& sample, const GradientCheckOptions& options) {
  return gradient_check(model, to_eigen(frame_to_features(sample.frame)), sample.label.index(), options);
}

}  // namespace asl::classifiers

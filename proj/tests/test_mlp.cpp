#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "asl/mlp.hpp"

using namespace asl;
using namespace asl::classifiers;

namespace {

const std::vector<std::size_t> kTiny{63, 8, 8, 8, 8, 8, 8, 8, 8, 24};

Eigen::VectorXd random_input(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::VectorXd x(63);
  for (auto& v : x) v = n(rng);
  return x;
}

// Small biases keep hidden units away from the rectifier kink.
MlpModel jittered_biases(MlpModel m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (auto& layer : m.layers()) {
    for (auto& b : layer.bias) b = u(rng);
  }
  return m;
}

Dataset separable(std::size_t per_class, std::uint64_t seed) {
  SyntheticOptions o;
  o.per_class = per_class;
  o.jitter = 2.0;
  o.placement = false;
  o.seed = seed;
  Dataset ds = generate_synthetic(o);
  // Centre and shrink so the unnormalized coordinates suit a fresh network.
  for (auto& s : ds.samples) {
    for (auto& p : s.frame.points) p = {p.x / 100.0, p.y / 100.0, p.z / 100.0};
  }
  return ds;
}

}  // namespace

TEST_CASE("2-2-2 forward pass matches a hand computation") {
  Eigen::MatrixXd w1(2, 2), w2(2, 2);
  w1 << 1.0, -1.0, 0.5, 2.0;
  w2 << 1.0, 0.0, -1.0, 1.0;
  const MlpModel m({{w1, Eigen::Vector2d(0.0, -1.0)}, {w2, Eigen::Vector2d(0.5, 0.0)}});
  // hidden = relu([2-1, 1+2-1]) = (1, 2); logits = (1.5, 1.0)
  const Eigen::VectorXd p = m.forward(Eigen::VectorXd(Eigen::Vector2d(2.0, 1.0)));
  CHECK(p(0) == doctest::Approx(0.6224593312018546).epsilon(1e-15));
  CHECK(p(1) == doctest::Approx(0.37754066879814546).epsilon(1e-15));

  // Negative pre-activation is clipped: input (0, 1) gives hidden = relu(-1, 1) = (0, 1).
  const Eigen::VectorXd q = m.forward(Eigen::VectorXd(Eigen::Vector2d(0.0, 1.0)));
  // logits = (0.5, 1.0)
  CHECK(q(1) == doctest::Approx(0.6224593312018546).epsilon(1e-15));
}

TEST_CASE("zero network outputs the uniform distribution") {
  const auto m = MlpModel::zeros(default_mlp_widths());
  const auto p = mlp_forward(m, FeatureVector{});
  REQUIRE(p.size() == 24);
  for (double v : p) CHECK(v == doctest::Approx(1.0 / 24.0).epsilon(1e-15));
  CHECK(mlp_loss(p, Label::from_char('k')) == doctest::Approx(3.1780538303479458).epsilon(1e-14));
}

TEST_CASE("cross-entropy edge cases") {
  std::vector<double> one_hot(24, 0.0);
  one_hot[3] = 1.0;
  CHECK(mlp_loss(one_hot, Label::from_index(3)) == 0.0);
  CHECK(mlp_loss(one_hot, Label::from_index(4)) == doctest::Approx(27.631021115928547).epsilon(1e-14));
  CHECK(std::isfinite(mlp_loss(one_hot, Label::from_index(4))));
}

TEST_CASE("mlp_init validates the shape and is seeded") {
  CHECK_THROWS_AS(mlp_init({64, 8, 8, 8, 8, 8, 8, 8, 8, 24}, 0), std::invalid_argument);
  CHECK_THROWS_AS(mlp_init({63, 8, 8, 8, 8, 8, 8, 8, 8, 23}, 0), std::invalid_argument);
  CHECK_THROWS_AS(mlp_init({63, 8, 24}, 0), std::invalid_argument);
  CHECK_THROWS_AS(mlp_init({63, 8, 8, 8, 0, 8, 8, 8, 8, 24}, 0), std::invalid_argument);
  const auto a = mlp_init(default_mlp_widths(), 5);
  CHECK(a == mlp_init(default_mlp_widths(), 5));
  CHECK_FALSE(a == mlp_init(default_mlp_widths(), 6));
  CHECK(a.widths() == default_mlp_widths());
  CHECK(a.layers().size() == 9);
  for (const auto& layer : a.layers()) {
    const double limit = std::sqrt(6.0 / double(layer.weights.rows() + layer.weights.cols()));
    CHECK(layer.weights.cwiseAbs().maxCoeff() <= limit);
    CHECK(layer.bias.isZero(0.0));
  }
}

TEST_CASE("network constructor rejects shapes that do not chain") {
  CHECK_THROWS_AS(MlpModel(std::vector<DenseLayer>{}), std::invalid_argument);
  CHECK_THROWS_AS(MlpModel({{Eigen::MatrixXd::Zero(3, 2), Eigen::VectorXd::Zero(2)}}), std::invalid_argument);
  CHECK_THROWS_AS(MlpModel({{Eigen::MatrixXd::Zero(3, 2), Eigen::VectorXd::Zero(3)},
                            {Eigen::MatrixXd::Zero(2, 4), Eigen::VectorXd::Zero(2)}}),
                  std::invalid_argument);
}

TEST_CASE("property: outputs are probability distributions") {
  std::mt19937_64 rng(31);
  for (int m = 0; m < 20; ++m) {
    const auto model = mlp_init(m % 2 ? default_mlp_widths() : kTiny, rng());
    for (int t = 0; t < 25; ++t) {
      // Input magnitudes up to raw landmark scale exercise the max-subtracted softmax.
      const Eigen::VectorXd x = random_input(rng, std::pow(10.0, t % 5));
      const Eigen::VectorXd p = model.forward(x);
      CHECK(p.allFinite());
      CHECK(p.minCoeff() >= 0.0);
      CHECK(std::abs(p.sum() - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("softmax survives extreme logits") {
  Eigen::MatrixXd z(3, 1);
  z << 1000.0, -1000.0, 999.0;
  const auto p = softmax_columns(z);
  CHECK(p.allFinite());
  CHECK(p.sum() == doctest::Approx(1.0));
  CHECK(p(1, 0) == 0.0);
}

TEST_CASE("prediction is the arg-max with ties to the lower index") {
  auto m = MlpModel::zeros(kTiny);
  CHECK(mlp_predict(m, FeatureVector{}).letter() == 'a');
  m.layers().back().bias(5) = 1.0;
  m.layers().back().bias(9) = 1.0;
  CHECK(mlp_predict(m, FeatureVector{}).index() == 5);
}

TEST_CASE("property: analytic gradients match central differences") {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 5; ++t) {
    const auto model = jittered_biases(mlp_init(kTiny, rng()), rng());
    const auto x = random_input(rng);
    const std::size_t target = rng() % 24;
    CHECK(gradient_check(model, x, target) < 1e-4);
  }
}

TEST_CASE("gradient check through the Sample overload") {
  const Dataset ds = separable(1, 3);
  const auto model = jittered_biases(mlp_init(kTiny, 8), 9);
  CHECK(gradient_check(model, ds.samples[7]) < 1e-4);
}

TEST_CASE("corrupted gradient fails the check") {
  std::mt19937_64 rng(43);
  const auto model = jittered_biases(mlp_init(kTiny, 1), 2);
  GradientCheckOptions opts;
  opts.corrupt_factor = 1.5;
  CHECK(gradient_check(model, random_input(rng), 3, opts) > 1e-2);
}

TEST_CASE("saturated target gives zero gradients on both sides") {
  auto model = MlpModel::zeros(kTiny);
  model.layers().back().bias(2) = 1000.0;  // p(target) == 1 exactly
  std::mt19937_64 rng(47);
  CHECK(gradient_check(model, random_input(rng), 2) == 0.0);
  const auto grads = mlp_gradients(model, Eigen::MatrixXd(random_input(rng)), {2});
  for (const auto& g : grads) {
    CHECK(g.weights.cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(g.bias.cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("batch gradient is the mean of per-sample gradients") {
  std::mt19937_64 rng(53);
  const auto model = jittered_biases(mlp_init(kTiny, 4), 5);
  Eigen::MatrixXd batch(63, 3);
  std::vector<std::size_t> targets{1, 7, 23};
  for (int j = 0; j < 3; ++j) batch.col(j) = random_input(rng);
  const auto together = mlp_gradients(model, batch, targets);
  std::vector<DenseLayer> sum;
  for (int j = 0; j < 3; ++j) {
    const auto g = mlp_gradients(model, Eigen::MatrixXd(batch.col(j)), {targets[std::size_t(j)]});
    if (sum.empty()) {
      sum = g;
    } else {
      for (std::size_t l = 0; l < g.size(); ++l) {
        sum[l].weights += g[l].weights;
        sum[l].bias += g[l].bias;
      }
    }
  }
  for (std::size_t l = 0; l < sum.size(); ++l) {
    CHECK((together[l].weights - sum[l].weights / 3.0).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((together[l].bias - sum[l].bias / 3.0).cwiseAbs().maxCoeff() <= 1e-12);
  }
  CHECK_THROWS_AS(mlp_gradients(model, batch, {1, 2}), std::invalid_argument);
}

TEST_CASE("zero epochs returns the model untouched") {
  const auto model = mlp_init(kTiny, 3);
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto r = mlp_train(model, separable(2, 1), cfg);
  CHECK(r.model == model);
  CHECK(r.curves.loss.empty());
  CHECK(r.curves.accuracy.empty());
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  const auto model = mlp_init(kTiny, 3);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 0.0;
  const auto r = mlp_train(model, separable(2, 1), cfg);
  CHECK(r.model == model);
  REQUIRE(r.curves.loss.size() == 3);
  // Batches are summed in shuffled order, so only rounding may differ.
  CHECK(r.curves.loss[0] == doctest::Approx(r.curves.loss[2]).epsilon(1e-12));
}

TEST_CASE("training lowers the loss and is reproducible") {
  const Dataset ds = separable(5, 2);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.seed = 17;
  const auto model = mlp_init(default_mlp_widths(), 17);
  const auto a = mlp_train(model, ds, cfg);
  REQUIRE(a.curves.loss.size() == 40);
  REQUIRE(a.curves.accuracy.size() == 40);
  CHECK(a.curves.loss.back() < a.curves.loss.front());
  CHECK(a.curves.accuracy.back() > 0.9);
  CHECK(a.model.finite());
  const auto b = mlp_train(model, ds, cfg);
  CHECK(a.model == b.model);
  CHECK(a.curves.loss == b.curves.loss);
  cfg.seed = 18;
  CHECK_FALSE(mlp_train(model, ds, cfg).model == a.model);
}

TEST_CASE("training config validation") {
  TrainConfig cfg;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.beta1 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.learning_rate = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("parameter count of the default stack") {
  // 63*256 + 256*128 + 128*128 + 128*64 + 64*64 + 64*32 + 32*32 + 32*32 + 32*24 weights, plus biases.
  const std::size_t weights = 63 * 256 + 256 * 128 + 128 * 128 + 128 * 64 + 64 * 64 + 64 * 32 + 32 * 32 + 32 * 32 + 32 * 24;
  const std::size_t biases = 256 + 128 + 128 + 64 + 64 + 32 + 32 + 32 + 24;
  CHECK(mlp_init(default_mlp_widths(), 0).parameter_count() == weights + biases);
}

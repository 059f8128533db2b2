#include "doctest.h"

#include "mixsnn/experiments.hpp"
#include "mixsnn/training.hpp"

#include <cmath>

using namespace mixsnn;

namespace {

FrozenNoiseDataset toy_data(std::uint64_t seed = 0) {
  FrozenNoiseParams p;
  p.n_test = 0;
  return generate_frozen_noise(p, seed);
}

TrainConfig quiet_config(int epochs) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.mismatch_enabled = false;
  return cfg;
}

}  // namespace

TEST_CASE("mse loss examples") {
  SpikeRaster a = make_target(0, 5);
  CHECK(mse_spike_loss(a, a) == 0.0);
  SpikeRaster zeros(5, 2, 1e-3);
  SpikeRaster ones(SpikeMatrix::Ones(5, 2), 1e-3);
  CHECK(mse_spike_loss(zeros, ones) == 1.0);
  CHECK(mse_spike_loss(zeros, a) == 0.5);
  CHECK_THROWS_AS(mse_spike_loss(zeros, SpikeRaster(4, 2, 1e-3)), DimensionError);
  MatrixXd x(1, 2), y(1, 2);
  x << 0.5, 0.0;
  y << 1.0, 1.0;
  CHECK(mse_spike_loss(x, y) == doctest::Approx((0.25 + 1.0) / 2.0));
}

TEST_CASE("target rasters") {
  SpikeRaster t0 = make_target(0, 3);
  SpikeMatrix e0(3, 2);
  e0 << 1, 0, 1, 0, 1, 0;
  CHECK(t0.data() == e0);
  SpikeMatrix e1(3, 2);
  e1 << 0, 1, 0, 1, 0, 1;
  CHECK(make_target(1, 3).data() == e1);
  CHECK(make_target(0, 0).n_steps() == 0);
  CHECK_THROWS_AS(make_target(2, 3), ParameterError);
}

TEST_CASE("surrogate spike") {
  CHECK(surrogate_spike(1.0, 10.0).derivative == doctest::Approx(2.5));
  CHECK(surrogate_spike(0.5, 10.0).derivative < 2.5);
  CHECK(surrogate_spike(2.0, 10.0).derivative < 2.5);
  CHECK(surrogate_spike(0.5, 10.0).derivative < surrogate_spike(0.8, 10.0).derivative);
  CHECK(surrogate_spike(0.999, 10.0).spike == 0.0);
  CHECK(surrogate_spike(1.001, 10.0).spike == 1.0);
  CHECK(surrogate_spike(1.0, 10.0).spike == 1.0);
  // The derivative is that of smooth_spike.
  const double h = 1e-7;
  for (double r : {0.3, 0.9, 1.4, 3.0}) {
    const double fd = (smooth_spike(r + h, 10.0) - smooth_spike(r - h, 10.0)) / (2 * h);
    CHECK(surrogate_spike(r, 10.0).derivative == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("untrained network against a one-hot target has loss near one half") {
  auto data = toy_data();
  Network net = init_network(60, 2, default_params(), 0);
  auto pairs = data.training_pairs();
  auto g = batch_loss_and_gradient(net, pairs);
  CHECK(g.loss == doctest::Approx(0.5).epsilon(0.2));
  CHECK(std::abs(g.loss - 0.5) <= 0.1);
}

TEST_CASE("BPTT gradient of the smoothed forward matches finite differences") {
  // Three steps, two neurons. Large weights put both neurons near threshold
  // so every path in the backward sweep carries gradient.
  SimParams p = default_params();
  MatrixXd w_in(3, 2);
  w_in << 300.0, 150.0, 120.0, 280.0, -40.0, 60.0;
  MatrixXd w_rec(2, 2);
  w_rec << 0.5, 40.0, -30.0, 0.7;
  Network net = make_network(w_in, w_rec, p);
  SpikeRaster in(3, 3, 1e-3);
  in.set(0, 0, true);
  in.set(0, 1, true);
  in.set(1, 1, true);
  in.set(1, 2, true);
  in.set(2, 0, true);
  in.set(2, 2, true);
  MatrixXd target(3, 2);
  target << 1, 0, 0, 1, 1, 1;

  BpttOptions opt;
  opt.mode = ForwardMode::smooth;
  auto g = loss_and_gradient(net, in, target, opt);
  CHECK(g.loss == doctest::Approx(forward_loss(net, in, target, opt)));

  double worst = 0.0;
  auto check = [&](MatrixXd Network::*field, const MatrixXd& analytic) {
    for (Index k = 0; k < analytic.size(); ++k) {
      Network plus = net, minus = net;
      double& wp = (plus.*field).data()[k];
      double& wm = (minus.*field).data()[k];
      const double h = 1e-6 * std::max(std::abs(wp), 1.0);
      wp += h;
      wm -= h;
      const double fd = (forward_loss(plus, in, target, opt) - forward_loss(minus, in, target, opt)) / (2 * h);
      const double a = analytic.data()[k];
      const double scale = std::max({std::abs(fd), std::abs(a), 1e-8});
      worst = std::max(worst, std::abs(a - fd) / scale);
    }
  };
  check(&Network::w_in, g.w_in);
  check(&Network::w_rec, g.w_rec);
  CHECK(g.w_in.cwiseAbs().maxCoeff() > 1e-6);
  CHECK(worst < 1e-4);
}

TEST_CASE("Adam first step direction is invariant to loss scaling") {
  MatrixXd g(2, 3);
  g << 0.3, -1e-4, 2.0, -7.0, 0.01, -0.5;
  AdamConfig cfg{1e-3};
  for (double c : {1e-3, 1.0, 1e3}) {
    MatrixXd p = MatrixXd::Zero(2, 3);
    AdamMoments<> m(2, 3);
    m.update(p, (c * g).eval(), cfg, 1);
    CHECK(((p.array() < 0) == (g.array() > 0)).all());
    CHECK(((p.array() > 0) == (g.array() < 0)).all());
  }
}

TEST_CASE("Adam reduces a quadratic almost every step") {
  MatrixXd a(3, 3);
  a << 2, 0.5, 0, 0.5, 1, 0.2, 0, 0.2, 3;
  MatrixXd b(3, 1);
  b << 1, -2, 0.5;
  MatrixXd x = MatrixXd::Zero(3, 1);
  AdamMoments<> m;
  auto f = [&](const MatrixXd& v) { return (a * v - b).squaredNorm(); };
  int descents = 0;
  double prev = f(x);
  for (int t = 1; t <= 100; ++t) {
    MatrixXd grad = 2.0 * a.transpose() * (a * x - b);
    m.update(x, grad, AdamConfig{1e-2}, t);
    const double now = f(x);
    descents += now < prev;
    prev = now;
  }
  CHECK(descents >= 90);
}

TEST_CASE("hard forward with surrogate gradients descends on a fixed batch") {
  for (std::uint64_t seed : {0, 1, 2}) {
    auto data = toy_data(seed);
    Network net = init_network(60, 2, default_params(), seed);
    auto pairs = data.training_pairs();
    TrainConfig cfg = quiet_config(101);
    cfg.learning_rate = 1e-3;
    auto rec = train(net, std::span<const LabeledRaster>(pairs.data(), 1), cfg);
    int non_increasing = 0;
    for (std::size_t e = 1; e < rec.loss.size(); ++e) non_increasing += rec.loss[e] <= rec.loss[e - 1];
    CHECK(non_increasing >= 90);
    CHECK(rec.loss.back() < rec.loss.front());
  }
}

TEST_CASE("zero learning rate leaves the parameters unchanged") {
  auto data = toy_data();
  Network net = init_network(60, 2, default_params(), 3);
  auto pairs = data.training_pairs();
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.learning_rate = 0.0;
  auto rec = train(net, pairs, cfg);
  CHECK(rec.final_params.w_in == net.w_in);
  CHECK(rec.final_params.w_rec == net.w_rec);
  CHECK(rec.loss.size() == 20);
}

TEST_CASE("training is reproducible and reduces the loss") {
  auto data = toy_data(4);
  Network net = init_network(60, 2, default_params(), 4);
  auto pairs = data.training_pairs();
  TrainConfig cfg;
  cfg.epochs = 400;
  cfg.seed = 9;
  cfg.mismatch.seed = 9;
  auto a = train(net, pairs, cfg);
  auto b = train(net, pairs, cfg);
  CHECK(a.loss == b.loss);
  CHECK(a.final_params.w_in == b.final_params.w_in);
  double tail = 0;
  for (std::size_t e = a.loss.size() - 20; e < a.loss.size(); ++e) tail += a.loss[e] / 20.0;
  CHECK(tail < a.loss.front());
  CHECK(a.final_params.w_rec.cwiseAbs().maxCoeff() <= cfg.recurrent_limit);
  CHECK(a.final_params.w_in.cwiseAbs().maxCoeff() <= cfg.weight_limit);
}

TEST_CASE("callback may stop training early") {
  auto data = toy_data();
  Network net = init_network(60, 2, default_params(), 0);
  auto pairs = data.training_pairs();
  auto rec = train(net, pairs, quiet_config(50), [](int epoch, double, const Network&) { return epoch < 9; });
  CHECK(rec.loss.size() == 10);
}

TEST_CASE("training configuration errors") {
  Network net = init_network(60, 2, default_params(), 0);
  auto pairs = toy_data().training_pairs();
  TrainConfig cfg = quiet_config(0);
  CHECK_THROWS_AS(train(net, pairs, cfg), ParameterError);
  cfg = quiet_config(1);
  cfg.adam_beta1 = 1.0;
  CHECK_THROWS_AS(train(net, pairs, cfg), ParameterError);
  cfg = quiet_config(1);
  cfg.trainable = {"Itau_mem"};
  CHECK_THROWS_AS(train(net, pairs, cfg), ParameterError);
  CHECK_THROWS_AS(train(net, std::span<const LabeledRaster>{}, quiet_config(1)), ParameterError);
}

TEST_CASE("adversarial training runs and is deterministic") {
  auto data = toy_data();
  Network net = init_network(60, 2, default_params(), 0);
  auto pairs = data.training_pairs();
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.mismatch.refresh_period = 10;
  cfg.adversarial_step = 0.05;
  auto a = train(net, pairs, cfg);
  auto b = train(net, pairs, cfg);
  CHECK(a.loss == b.loss);
  for (double l : a.loss) CHECK(std::isfinite(l));
}

#include "doctest.h"

#include "mixsnn/mismatch.hpp"

#include <cmath>

using namespace mixsnn;

namespace {

Network small_net() {
  MatrixXd w_in(3, 2);
  w_in << 1.0, -2.0, 0.5, 3.0, -1.5, 0.25;
  MatrixXd w_rec(2, 2);
  w_rec << 0.0, 0.5, -0.5, 0.0;
  return make_network(w_in, w_rec, default_params());
}

}  // namespace

TEST_CASE("perturbation statistics over many draws") {
  // A large input matrix gives many independent samples from one draw.
  Network net = make_network(MatrixXd::Ones(1000, 100), MatrixXd::Zero(100, 100), default_params());
  MismatchSpec spec;
  spec.sigma_rel = 0.1;
  spec.seed = 7;
  spec.targets = {"w_in"};
  MismatchDraw d = draw_mismatch(net, spec, 0);
  const ArrayXd f = d.w_in_factor.reshaped().array();
  const double mean = f.mean();
  const double sd = std::sqrt((f - mean).square().sum() / static_cast<double>(f.size() - 1));
  CHECK(std::abs(mean - 1.0) < 0.005);
  CHECK(std::abs(sd / 0.1 - 1.0) < 0.02);
  CHECK((d.w_rec_factor.array() == 1.0).all());
}

TEST_CASE("current perturbations have the requested spread") {
  Network small = make_network(MatrixXd::Zero(1, 4), MatrixXd::Zero(4, 4), default_params());
  small.params.assign(20000, default_params());
  small.w_in = MatrixXd::Zero(1, 20000);
  small.w_rec = MatrixXd::Zero(0, 0);
  MismatchSpec spec;
  spec.sigma_rel = 0.2;
  spec.targets = {"Itau_mem"};
  MismatchDraw d = draw_mismatch(small, spec, 3);
  double s = 0, ss = 0;
  for (const auto& f : d.current_factor) {
    const double v = f[static_cast<std::size_t>(Current::Itau_mem)];
    s += v;
    ss += v * v;
    CHECK(f[static_cast<std::size_t>(Current::Igain_mem)] == 1.0);
  }
  const double n = static_cast<double>(d.current_factor.size());
  const double mean = s / n;
  const double sd = std::sqrt((ss - n * mean * mean) / (n - 1));
  CHECK(std::abs(mean - 1.0) < 0.01);
  CHECK(std::abs(sd / 0.2 - 1.0) < 0.03);
}

TEST_CASE("zero sigma is the identity") {
  Network net = small_net();
  MismatchSpec spec;
  spec.sigma_rel = 0.0;
  Network out = sample_mismatch(net, spec, 5);
  CHECK(out.w_in == net.w_in);
  CHECK(out.w_rec == net.w_rec);
  CHECK(out.params == net.params);
}

TEST_CASE("draws are reproducible and refresh by period") {
  Network net = small_net();
  MismatchSpec spec;
  spec.seed = 11;
  Network a = sample_mismatch(net, spec, 2);
  Network b = sample_mismatch(net, spec, 2);
  Network c = sample_mismatch(net, spec, 3);
  CHECK(a.w_in == b.w_in);
  CHECK(a.params == b.params);
  CHECK(a.w_in != c.w_in);
  spec.refresh_period = 100;
  CHECK(spec.draw_index(0) == 0);
  CHECK(spec.draw_index(99) == 0);
  CHECK(spec.draw_index(100) == 1);
}

TEST_CASE("perturbed currents stay above the floor and signs are kept") {
  Network net = small_net();
  MismatchSpec spec;
  spec.sigma_rel = 0.9;
  for (std::uint64_t k = 0; k < 50; ++k) {
    Network out = sample_mismatch(net, spec, k);
    for (const auto& p : out.params) {
      for (double v : p.currents) CHECK(v >= kCurrentFloor);
    }
    CHECK((out.w_in.array() * net.w_in.array() >= 0.0).all());
  }
  CHECK(perturb_current(1e-12, 0.2, -10.0) == kCurrentFloor);
  CHECK(perturb_current(1e-12, 0.2, 1.0) == doctest::Approx(1.2e-12));
}

TEST_CASE("unaffected targets and invalid specs") {
  Network net = small_net();
  MismatchSpec spec;
  spec.targets = {"w_rec"};
  Network out = sample_mismatch(net, spec, 0);
  CHECK(out.w_in == net.w_in);
  CHECK(out.params == net.params);
  spec.targets = {"Inope"};
  CHECK_THROWS_AS(draw_mismatch(net, spec, 0), ParameterError);
  spec = {};
  spec.sigma_rel = 1.0;
  CHECK_THROWS_AS(draw_mismatch(net, spec, 0), ParameterError);
  spec = {};
  spec.refresh_period = 0;
  CHECK_THROWS_AS(draw_mismatch(net, spec, 0), ParameterError);
  CHECK_FALSE(MismatchSpec::default_targets().contains("Ireset"));
  CHECK(MismatchSpec::default_targets().contains("w_in"));
}

TEST_CASE("adversarial step moves each weight against the loss") {
  MatrixXd w_in(1, 2);
  w_in << 2.0, -4.0;
  Network net = make_network(w_in, MatrixXd::Zero(2, 2), default_params());
  NetworkGradient g{MatrixXd(1, 2), MatrixXd::Zero(2, 2), {}};
  g.w_in << 1.0, 1.0;
  Network out = adversarial_perturb(net, g, 0.1, {"w_in"});
  CHECK(out.w_in(0, 0) == doctest::Approx(2.2));
  CHECK(out.w_in(0, 1) == doctest::Approx(-3.6));
  g.w_in << -1.0, 0.0;
  out = adversarial_perturb(net, g, 0.1, {"w_in"});
  CHECK(out.w_in(0, 0) == doctest::Approx(1.8));
  CHECK(out.w_in(0, 1) == -4.0);
  out = adversarial_perturb(net, g, 0.0, {"w_in"});
  CHECK(out.w_in == net.w_in);

  g.currents.assign(2, {});
  g.currents[0][static_cast<std::size_t>(Current::Itau_mem)] = 1.0;
  out = adversarial_perturb(net, g, 0.1, {"Itau_mem"});
  CHECK(out.params[0][Current::Itau_mem] == doctest::Approx(1.1 * net.params[0][Current::Itau_mem]));
  CHECK(out.params[1][Current::Itau_mem] == net.params[1][Current::Itau_mem]);

  NetworkGradient bad{MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 2), {}};
  CHECK_THROWS_AS(adversarial_perturb(net, bad, 0.1), DimensionError);
}

#include "doctest.h"

#include "mixsnn/hwconfig.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace mixsnn;

namespace {

constexpr double kI0 = 2.5e-13;

double formula(int coarse, int fine) { return kI0 * std::pow(8.0, coarse) * (fine + 1) / 256.0; }

AutoencoderConfig fast_quantizer() {
  AutoencoderConfig cfg;
  cfg.restarts = 32;
  return cfg;
}

Network toy_network(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> in(8.0, 6.0), rec(0.0, 0.6);
  MatrixXd w_in(60, 2), w_rec(2, 2);
  for (Index k = 0; k < w_in.size(); ++k) w_in.data()[k] = in(rng);
  for (Index k = 0; k < w_rec.size(); ++k) w_rec.data()[k] = rec(rng);
  w_in(3, 0) = 0.0;
  w_in(7, 1) = 0.0;
  return make_network(w_in, w_rec, default_params());
}

struct Deployed {
  HardwareSpec spec;
  HardwareQuantization q;
  DeviceConfig config;
};

Deployed deploy(const Network& net, const BiasTable& table) {
  Deployed d;
  d.spec = map_graph(as_graph(spec_from_network(net)));
  d.q = quantize_hardware(d.spec, fast_quantizer());
  d.config = config_from_specification(d.spec, d.q, table);
  return d;
}

}  // namespace

TEST_CASE("synthetic table follows its formula") {
  BiasTable t = BiasTable::synthetic();
  CHECK(t.entries().size() == 6 * 256);
  for (const auto& e : t.entries()) CHECK(e.current == doctest::Approx(formula(e.code.coarse, e.code.fine)).epsilon(1e-14));
  CHECK(t.current({3, 17}) == doctest::Approx(formula(3, 17)));
  CHECK_THROWS_AS(t.current({6, 0}), ValidationError);
  CHECK(t.min_current() == doctest::Approx(formula(0, 0)));
  CHECK(t.max_current() == doctest::Approx(formula(5, 255)));
}

TEST_CASE("exact hits map to their code") {
  BiasTable t = BiasTable::synthetic();
  CHECK(current_to_code(formula(2, 100), t) == BiasCode{2, 100});
  CHECK(current_to_code(formula(0, 0), t) == BiasCode{0, 0});
  CHECK(current_to_code(formula(5, 255), t) == BiasCode{5, 255});
}

TEST_CASE("code to current to code round trip") {
  BiasTable t = BiasTable::synthetic();
  int duplicates = 0;
  for (const auto& e : t.entries()) {
    const BiasCode back = current_to_code(e.current, t);
    // The current always survives the round trip.
    CHECK(t.current(back) == doctest::Approx(e.current).epsilon(1e-12));
    // (c, f) with f + 1 <= 32 repeats the current of (c - 1, 8 (f + 1) - 1),
    // possibly again one band lower; the lowest coarse comes back.
    BiasCode lowest = e.code;
    while (lowest.coarse > 0 && 8 * (lowest.fine + 1) <= 256) lowest = {lowest.coarse - 1, 8 * (lowest.fine + 1) - 1};
    if (lowest != e.code) ++duplicates;
    CHECK(back == lowest);
  }
  CHECK(duplicates == 5 * 32);
}

TEST_CASE("geometric mean of adjacent fine steps goes to the lower fine") {
  BiasTable t = BiasTable::synthetic();
  for (int f = 0; f < 255; ++f) {
    const double mid = std::sqrt(formula(0, f) * formula(0, f + 1));
    CHECK(current_to_code(mid, t) == BiasCode{0, f});
  }
  const double mid = std::sqrt(formula(4, 200) * formula(4, 201));
  CHECK(current_to_code(mid, t) == BiasCode{4, 200});
}

TEST_CASE("log-nearest rounding error is at most half the local step") {
  BiasTable t = BiasTable::synthetic();
  const double lo = std::log(t.min_current()), hi = std::log(t.max_current());
  for (int i = 0; i < 10000; ++i) {
    const double current = std::exp(lo + (hi - lo) * i / 9999.0);
    const double decoded = t.current(current_to_code(current, t));
    CHECK(std::abs(std::log(decoded / current)) <= 0.5 * t.log_step_at(current) + 1e-12);
  }
}

TEST_CASE("out of range currents report the nearest achievable value") {
  BiasTable t = BiasTable::synthetic();
  try {
    current_to_code(1e-6, t);
    FAIL("expected a range error");
  } catch (const RangeError& e) {
    CHECK(e.nearest_achievable == t.max_current());
  }
  try {
    current_to_code(1e-17, t);
    FAIL("expected a range error");
  } catch (const RangeError& e) {
    CHECK(e.nearest_achievable == t.min_current());
  }
  CHECK_THROWS_AS(current_to_code(0.0, t), RangeError);
  SimParams p = default_params();
  p[Current::Ispkthr] = 1e-6;
  try {
    translate_params(p, t);
    FAIL("expected a range error");
  } catch (const RangeError& e) {
    CHECK(std::string(e.what()).find("Ispkthr") != std::string::npos);
  }
}

TEST_CASE("bias table CSV") {
  BiasTable t = BiasTable::synthetic(1e-13, 2, 4);
  std::stringstream ss;
  write_bias_table(ss, t);
  CHECK(ss.str().rfind("coarse,fine,current_ampere\n", 0) == 0);
  BiasTable back = read_bias_table(ss);
  REQUIRE(back.entries().size() == t.entries().size());
  for (std::size_t i = 0; i < t.entries().size(); ++i) {
    CHECK(back.entries()[i].code == t.entries()[i].code);
    CHECK(back.entries()[i].current == t.entries()[i].current);
  }
  std::stringstream bad("coarse,fine,current_ampere\n0,0,2e-13\n0,1,1e-13\n");
  CHECK_THROWS_AS(read_bias_table(bad), ValidationError);
  std::stringstream junk("coarse,fine,current_ampere\n0,x,2e-13\n");
  CHECK_THROWS_AS(read_bias_table(junk), ValidationError);
}

TEST_CASE("toy deployment: CAM entries count the nonzero quantized weights") {
  BiasTable t = BiasTable::synthetic();
  Deployed d = deploy(toy_network(1), t);
  REQUIRE(d.config.cores.size() == 1);
  const auto& neurons = d.config.cores[0].neurons;
  REQUIRE(neurons.size() == 2);
  REQUIRE(d.q.size() == 1);
  const auto& cq = d.q[0];
  for (const auto& nc : neurons) {
    const Index col = nc.tag;
    const Index expected = (cq.w_in.mask.col(col).array() != 0).count() + (cq.w_rec.mask.col(col).array() != 0).count();
    CHECK(static_cast<Index>(nc.cam.size()) == expected);
    CHECK(nc.cam.size() <= 62);
    CHECK(nc.cam.size() < 62);  // the two zeroed inputs are absent
  }
  CHECK(d.config.dt == 1e-3);
  CHECK(d.config.weight_unit == default_params()[Current::Iw_ref]);
  CHECK(d.config.n_neurons() == 2);
}

TEST_CASE("zero weights produce no CAM entries") {
  Network net = make_network(MatrixXd::Zero(5, 2), MatrixXd::Zero(2, 2), default_params());
  Deployed d = deploy(net, BiasTable::synthetic());
  for (const auto& nc : d.config.cores[0].neurons) {
    CHECK(nc.cam.empty());
    CHECK(nc.destinations.empty());
  }
  for (const auto& r : d.config.inputs) CHECK(r.targets.empty());
}

TEST_CASE("seventy afferents overflow the CAM") {
  Network net = make_network(MatrixXd::Constant(70, 1, 3.0), MatrixXd::Zero(1, 1), default_params());
  HardwareLimits wide;
  wide.synapses_per_neuron = 128;
  HardwareSpec spec = map_graph(as_graph(spec_from_network(net)), wide);
  auto q = quantize_hardware(spec, fast_quantizer());
  try {
    config_from_specification(spec, q, BiasTable::synthetic());
    FAIL("expected a CAM overflow");
  } catch (const MappingError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("CAM overflow") != std::string::npos);
    CHECK(msg.find("tag 0") != std::string::npos);
  }
}

TEST_CASE("round trip through the configuration is exact") {
  BiasTable t = BiasTable::synthetic();
  Network net = toy_network(2);
  Deployed d = deploy(net, t);
  Network direct = quantized_network(d.spec, d.q, t);
  Network back = net_from_config(d.config, t);
  CHECK(back.w_in == direct.w_in);
  CHECK(back.w_rec == direct.w_rec);
  CHECK(back.params == direct.params);

  // Quantized weights: sign times subset sum of translated bases.
  const auto& cq = d.q[0];
  for (Index i = 0; i < 60; ++i) {
    for (Index j = 0; j < 2; ++j) {
      const unsigned m = cq.w_in.mask(i, j);
      double s = 0;
      for (int k = 0; k < 4; ++k) {
        if (m & (1u << k)) s += t.current(current_to_code(cq.w_in.base_weights[k], t));
      }
      CHECK(back.w_in(i, j) == doctest::Approx(cq.w_in.sign(i, j) * s / 2e-10).epsilon(1e-12));
    }
  }

  // Every current within half a log step of its nominal value.
  for (Current c : hardware_currents()) {
    double nominal = net.params[0][c];
    if (c >= Current::Iw_base0 && c <= Current::Iw_base3) {
      nominal = cq.w_in.base_weights[static_cast<int>(c) - static_cast<int>(Current::Iw_base0)];
    }
    const double decoded = back.params[0][c];
    if (nominal <= kCurrentFloor) {
      CHECK(decoded == kCurrentFloor);
    } else {
      CHECK(std::abs(std::log(decoded / nominal)) <= 0.5 * t.log_step_at(nominal) + 1e-12);
    }
  }

  // Spike trains of both paths agree.
  SpikeRaster in(300, 60, 1e-3);
  std::mt19937_64 rng(8);
  std::bernoulli_distribution fire(0.05);
  for (Index s = 0; s < 300; ++s) {
    for (Index ch = 0; ch < 60; ++ch) in.set(s, ch, fire(rng));
  }
  CHECK(evolve(back, in).output == evolve(direct, in).output);
}

TEST_CASE("hand-written single neuron configuration") {
  BiasTable t = BiasTable::synthetic();
  SimParams p = default_params();
  CoreConfig core;
  for (Current c : hardware_currents()) core.biases[std::string(current_name(c))] = current_to_code(p[c], t);
  core.biases["Iw_base0"] = {1, 99};
  core.biases["Iw_base1"] = {2, 9};
  core.biases["Iw_base2"] = {2, 199};
  core.biases["Iw_base3"] = {3, 63};
  core.neurons.push_back({0, {{SourceKind::virtual_input, 0, Synapse::ampa, 0b0101}}, {}});
  DeviceConfig cfg;
  cfg.dt = 1e-3;
  cfg.weight_unit = 2e-10;
  cfg.cores.push_back(core);
  cfg.inputs.push_back({0, {0}});
  Network net = net_from_config(cfg, t);
  REQUIRE(net.w_in.rows() == 1);
  REQUIRE(net.w_in.cols() == 1);
  CHECK(net.w_in(0, 0) == doctest::Approx((formula(1, 99) + formula(2, 199)) / 2e-10).epsilon(1e-12));
  CHECK(net.w_rec(0, 0) == 0.0);

  DeviceConfig gaba = cfg;
  gaba.cores[0].neurons[0].cam[0].type = Synapse::gaba;
  CHECK(net_from_config(gaba, t).w_in(0, 0) == doctest::Approx(-net.w_in(0, 0)));
}

TEST_CASE("malformed configurations") {
  BiasTable t = BiasTable::synthetic();
  CHECK_THROWS_AS(net_from_config(DeviceConfig{1e-3, 2e-10, 64, {}, {}}, t), ValidationError);

  Deployed d = deploy(toy_network(3), t);
  auto broken = [&](auto mutate) {
    DeviceConfig c = d.config;
    mutate(c);
    return c;
  };
  CHECK_THROWS_AS(broken([](DeviceConfig& c) { c.cores[0].neurons[0].cam[0].mask = 16; }).validate(), ValidationError);
  CHECK_THROWS_AS(broken([](DeviceConfig& c) { c.cores[0].neurons[0].cam[0].type = Synapse::nmda; }).validate(),
                  ValidationError);
  CHECK_THROWS_AS(broken([](DeviceConfig& c) { c.cores[0].neurons[1].tag = 0; }).validate(), ValidationError);
  CHECK_THROWS_AS(broken([](DeviceConfig& c) { c.cores[0].biases.erase("Itau_mem"); }).validate(), ValidationError);
  CHECK_THROWS_AS(broken([](DeviceConfig& c) { c.cores[0].biases["Inope"] = {0, 0}; }).validate(), ValidationError);
  CHECK_THROWS_AS(broken([](DeviceConfig& c) { c.inputs.pop_back(); }).validate(), ValidationError);
  CHECK_THROWS_AS(broken([](DeviceConfig& c) { c.cam_slots = 3; }).validate(), ValidationError);
  CHECK_THROWS_AS(broken([](DeviceConfig& c) { c.dt = 0.0; }).validate(), ValidationError);
  CHECK_THROWS_AS(broken([](DeviceConfig& c) {
                    auto& cam = c.cores[0].neurons[0].cam;
                    cam.push_back(cam.front());
                  }).validate(),
                  ValidationError);
  CHECK_THROWS_AS(net_from_config(broken([](DeviceConfig& c) { c.cores[0].biases["Itau_mem"] = {9, 0}; }), t),
                  ValidationError);
}

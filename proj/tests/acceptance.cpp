// Acceptance run: one PASS/FAIL line per criterion, seed 0, default settings.
// Exit status is the number of failed criteria.

#include "mixsnn/device.hpp"
#include "mixsnn/experiments.hpp"
#include "reference.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

using namespace mixsnn;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

// Shared pipeline state; later criteria reuse the trained network.
struct Pipeline {
  FrozenNoiseDataset data;
  Network trained;
  HardwareSpec spec;
  HardwareQuantization q;
  BiasTable table = BiasTable::synthetic();
  DeviceConfig config;
};

bool winners_match(const FRRReport& r) { return r.targets[0].winner() == 0 && r.targets[1].winner() == 1; }

Outcome training(Pipeline& p) {
  p.data = generate_frozen_noise(FrozenNoiseParams{}, 0);
  TrainConfig cfg;
  Network init = init_network(60, 2, default_params(), 0);
  auto pairs = p.data.training_pairs();
  p.trained = train(init, pairs, cfg).final_params;
  FRRReport r = evaluate(simulation_runner(p.trained), p.data, Stage::simulated);
  const bool pass = r.targets[0].frr >= 5.0 && r.targets[1].frr >= 5.0 && winners_match(r) &&
                    r.test_mean.frr <= 1.5 && r.test_max_frr.frr <= 3.0;
  return {pass, format("%d epochs; target FRR %.2f, %.2f; test mean %.3f, max %.3f over %zu samples", cfg.epochs,
                       r.targets[0].frr, r.targets[1].frr, r.test_mean.frr, r.test_max_frr.frr, r.tests.size())};
}

Outcome quantized(Pipeline& p) {
  p.spec = map_graph(as_graph(spec_from_network(p.trained)));
  p.q = quantize_hardware(p.spec);
  Network qnet = quantized_network(p.spec, p.q, p.table);
  FRRReport r = evaluate(simulation_runner(qnet), p.data, Stage::quantized, 0);
  const bool pass = r.targets[0].frr >= 2.0 && r.targets[1].frr >= 2.0 && winners_match(r);
  return {pass, format("quantization loss %.4f; target FRR %.2f, %.2f; winners %d, %d", p.q.front().loss,
                       r.targets[0].frr, r.targets[1].frr, r.targets[0].winner(), r.targets[1].winner())};
}

Outcome device(Pipeline& p) {
  p.config = config_from_specification(p.spec, p.q, p.table);
  int correct = 0;
  std::string seeds;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    MismatchSpec m;
    m.sigma_rel = 0.2;
    m.seed = seed;
    VirtualDevice dev(p.config, p.table, m);
    const auto r0 = response_from_output(dev.run(p.data.targets[0]));
    const auto r1 = response_from_output(dev.run(p.data.targets[1]));
    const bool ok = r0.winner() == 0 && r1.winner() == 1;
    correct += ok;
    if (!ok) seeds += " " + std::to_string(seed);
  }
  return {correct >= 8, format("winner correct on %d/10 mismatch seeds; wrong on:%s", correct,
                               seeds.empty() ? " none" : seeds.c_str())};
}

Outcome quantizer() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int within = 0;
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    MatrixXd w(3, 3);
    for (Index k = 0; k < 9; ++k) w.data()[k] = u(rng);
    const double loss = autoencoder_quantize(w).loss;
    const double oracle = reference::grid_quantization_loss(w);
    const double ratio = oracle > 0.0 ? loss / oracle : (loss == 0.0 ? 0.0 : INFINITY);
    worst = std::max(worst, ratio);
    within += loss <= 1.10 * oracle;
  }
  return {within == 50, format("%d/50 within 1.10x of the grid oracle; worst ratio %.3f", within, worst)};
}

Outcome gradients() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> w_in(-600.0, 600.0), w_rec(-60.0, 60.0);
  std::bernoulli_distribution coin(0.5);
  BpttOptions opt;
  opt.mode = ForwardMode::smooth;
  double worst = 0.0;
  for (int point = 0; point < 100; ++point) {
    MatrixXd a(3, 2), r(2, 2), target(3, 2);
    for (Index k = 0; k < a.size(); ++k) a.data()[k] = w_in(rng);
    for (Index k = 0; k < r.size(); ++k) r.data()[k] = w_rec(rng);
    for (Index k = 0; k < target.size(); ++k) target.data()[k] = coin(rng);
    SpikeRaster in(3, 3, 1e-3);
    for (Index t = 0; t < 3; ++t) {
      for (Index c = 0; c < 3; ++c) in.set(t, c, coin(rng));
    }
    Network net = make_network(a, r, default_params());
    auto g = loss_and_gradient(net, in, target, opt);
    auto check = [&](MatrixXd Network::*field, const MatrixXd& analytic) {
      for (Index k = 0; k < analytic.size(); ++k) {
        Network plus = net, minus = net;
        double& wp = (plus.*field).data()[k];
        double& wm = (minus.*field).data()[k];
        const double h = 1e-6 * std::max(std::abs(wp), 1.0);
        wp += h;
        wm -= h;
        const double fd = (forward_loss(plus, in, target, opt) - forward_loss(minus, in, target, opt)) / (2 * h);
        const double an = analytic.data()[k];
        const double scale = std::max({std::abs(fd), std::abs(an), 1e-8});
        worst = std::max(worst, std::abs(an - fd) / scale);
      }
    };
    check(&Network::w_in, g.w_in);
    check(&Network::w_rec, g.w_rec);
  }
  return {worst < 1e-4, format("max relative error %.2e over 100 points", worst)};
}

Outcome round_trip(Pipeline& p) {
  Network direct = quantized_network(p.spec, p.q, p.table);
  Network back = net_from_config(p.config, p.table);
  const bool weights = back.w_in == direct.w_in && back.w_rec == direct.w_rec;

  double worst_step = 0.0;
  const SimParams& nominal = p.trained.params[0];
  for (Current c : hardware_currents()) {
    double want = nominal[c];
    if (c >= Current::Iw_base0 && c <= Current::Iw_base3) {
      want = p.q.front().w_in.base_weights[static_cast<int>(c) - static_cast<int>(Current::Iw_base0)];
    }
    if (want <= kCurrentFloor) continue;
    worst_step = std::max(worst_step, std::abs(std::log(back.params[0][c] / want)) / p.table.log_step_at(want));
  }

  MismatchSpec off;
  off.sigma_rel = 0.0;
  VirtualDevice dev(p.config, p.table, off);
  int identical = 0, runs = 0;
  auto compare = [&](const SpikeRaster& in) {
    identical += dev.run(in) == evolve(direct, in).output;
    ++runs;
  };
  compare(p.data.targets[0]);
  compare(p.data.targets[1]);
  for (std::size_t i = 0; i < 100; ++i) compare(p.data.tests[i]);
  const bool pass = weights && worst_step <= 0.5 + 1e-9 && identical == runs;
  return {pass, format("weights %s; worst current error %.3f log steps; %d/%d spike trains identical",
                       weights ? "exact" : "differ", worst_step, identical, runs)};
}

Outcome mapper() {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution fire(0.08);
  int equal = 0;
  Index spikes = 0;
  auto rand = [&](Index r, Index c, double scale) {
    MatrixXd m(r, c);
    for (Index k = 0; k < m.size(); ++k) m.data()[k] = scale * normal(rng);
    return m;
  };
  auto layer = [](Index n, MatrixXd rec) {
    NeuronModule m;
    m.size = n;
    m.params.assign(static_cast<std::size_t>(n), default_params());
    m.w_rec = std::move(rec);
    return m;
  };
  for (int trial = 0; trial < 20; ++trial) {
    NetSpec spec{{LinearModule{rand(8, 5, 60.0)}, layer(5, rand(5, 5, 10.0)), LinearModule{rand(5, 3, 80.0)},
                  layer(3, rand(3, 3, 10.0))}};
    SpikeRaster in(100, 8, 1e-3);
    for (Index t = 0; t < 100; ++t) {
      for (Index c = 0; c < 8; ++c) in.set(t, c, fire(rng));
    }
    const SpikeRaster expected = reference::layered_simulation(spec, in);
    equal += evolve(map_graph(as_graph(spec)).network(), in).output == expected;
    spikes += expected.total_spikes();
  }
  return {equal == 20, format("%d/20 networks spike-for-spike identical (%ld reference spikes)", equal,
                              static_cast<long>(spikes))};
}

Outcome mismatch() {
  Network net = make_network(MatrixXd::Ones(1, 1), MatrixXd::Zero(1, 1), default_params());
  MismatchSpec spec;
  spec.sigma_rel = 0.2;
  spec.seed = 0;
  const int n = 100000;
  const auto k = static_cast<std::size_t>(Current::Itau_mem);
  double sum = 0, sum_sq = 0;
  bool above_floor = true;
  for (int d = 0; d < n; ++d) {
    const MismatchDraw draw = draw_mismatch(net, spec, static_cast<std::uint64_t>(d));
    const double f = draw.current_factor[0][k];
    sum += f;
    sum_sq += f * f;
    const Network out = apply_mismatch(net, draw);
    for (double c : out.params[0].currents) above_floor = above_floor && c >= kCurrentFloor;
  }
  const double mean = sum / n;
  const double sd = std::sqrt((sum_sq - n * mean * mean) / (n - 1)) / spec.sigma_rel;
  const bool pass = std::abs(mean - 1.0) <= 0.01 && std::abs(sd - 1.0) <= 0.05 && above_floor;
  return {pass, format("relative mean %.5f, relative std %.4f of sigma, floor respected: %s", mean, sd,
                       above_floor ? "yes" : "no")};
}

Outcome throughput(const Pipeline& p) {
  TrainConfig cfg;
  cfg.epochs = 1000;
  const BenchResult b = bench_training(init_network(60, 2, default_params(), 0), p.data, cfg);
  return {b.epochs_per_second >= 100.0, format("%.0f epochs/s over %d epochs (%s)", b.epochs_per_second, b.epochs,
                                               machine_info().c_str())};
}

}  // namespace

int main() {
  Pipeline p;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"frozen-noise training", [&] { return training(p); }},
      {"quantized network", [&] { return quantized(p); }},
      {"virtual device", [&] { return device(p); }},
      {"quantizer optimality", quantizer},
      {"gradient correctness", gradients},
      {"round-trip integrity", [&] { return round_trip(p); }},
      {"mapper equivalence", mapper},
      {"mismatch statistics", mismatch},
      {"throughput", [&] { return throughput(p); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(Clock::now() - t0).count();
    std::printf("%s %zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(), s);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed;
}

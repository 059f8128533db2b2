#include "mixsnn/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include <sys/utsname.h>

namespace mixsnn {

Index FrozenNoiseParams::n_steps() const {
  return static_cast<Index>(std::llround(duration_s / dt));
}

void FrozenNoiseParams::validate() const {
  if (!(dt > 0.0) || !(duration_s >= 0.0)) throw ParameterError("dt and duration must be positive");
  if (!(rate_hz >= 0.0)) throw ParameterError("rate must be >= 0");
  if (rate_hz * dt > 1.0) throw ParameterError("rate * dt must not exceed 1");
  if (n_channels < 1 || n_test < 0) throw ParameterError("bad channel or test count");
}

SpikeRaster poisson_raster(Index n_steps, Index n_channels, double rate_hz, double dt,
                           std::uint64_t seed) {
  if (rate_hz * dt > 1.0) throw ParameterError("rate * dt must not exceed 1");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution spike(rate_hz * dt);
  SpikeRaster r(n_steps, n_channels, dt);
  for (Index t = 0; t < n_steps; ++t) {
    for (Index c = 0; c < n_channels; ++c) r.set(t, c, spike(rng));
  }
  return r;
}

namespace {

std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), 0x5eedu};
  std::mt19937_64 rng(seq);
  return rng();
}

}  // namespace

FrozenNoiseDataset generate_frozen_noise(const FrozenNoiseParams& params, std::uint64_t seed) {
  params.validate();
  FrozenNoiseDataset d;
  d.params = params;
  d.seed = seed;
  const Index steps = params.n_steps();
  for (int c = 0; c < 2; ++c) {
    d.targets[c] = poisson_raster(steps, params.n_channels, params.rate_hz, params.dt,
                                  sample_seed(seed, static_cast<std::uint64_t>(c)));
  }
  d.tests.reserve(static_cast<std::size_t>(params.n_test));
  for (Index i = 0; i < params.n_test; ++i) {
    d.tests.push_back(poisson_raster(steps, params.n_channels, params.rate_hz, params.dt,
                                     sample_seed(seed, static_cast<std::uint64_t>(2 + i))));
  }
  return d;
}

void save_dataset(const std::string& dir, const FrozenNoiseDataset& data) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream meta(fs::path(dir) / "dataset.txt");
    meta.precision(17);
    meta << "rate_hz=" << data.params.rate_hz << "\nduration_s=" << data.params.duration_s
         << "\ndt=" << data.params.dt << "\nn_channels=" << data.params.n_channels
         << "\nn_test=" << data.tests.size() << "\nseed=" << data.seed << "\n";
  }
  save_raster(fs::path(dir) / "target_0.txt", data.targets[0]);
  save_raster(fs::path(dir) / "target_1.txt", data.targets[1]);
  for (std::size_t i = 0; i < data.tests.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "test_%04zu.txt", i);
    save_raster(fs::path(dir) / name, data.tests[i]);
  }
}

FrozenNoiseDataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  FrozenNoiseDataset d;
  std::ifstream meta(fs::path(dir) / "dataset.txt");
  if (!meta) throw Error("missing dataset.txt in " + dir);
  std::string line;
  while (std::getline(meta, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    if (key == "rate_hz") d.params.rate_hz = std::stod(value);
    else if (key == "duration_s") d.params.duration_s = std::stod(value);
    else if (key == "dt") d.params.dt = std::stod(value);
    else if (key == "n_channels") d.params.n_channels = std::stoll(value);
    else if (key == "n_test") d.params.n_test = std::stoll(value);
    else if (key == "seed") d.seed = std::stoull(value);
  }
  d.targets[0] = load_raster(fs::path(dir) / "target_0.txt");
  d.targets[1] = load_raster(fs::path(dir) / "target_1.txt");
  for (Index i = 0; i < d.params.n_test; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "test_%04lld.txt", static_cast<long long>(i));
    d.tests.push_back(load_raster(fs::path(dir) / name));
  }
  return d;
}

double frr(double r0, double r1) {
  if (r0 < 0.0 || r1 < 0.0 || std::isnan(r0) || std::isnan(r1)) {
    throw ValidationError("firing rates must be non-negative");
  }
  double hi = std::max(r0, r1), lo = std::min(r0, r1);
  if (hi == 0.0) return 1.0;
  if (lo == 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::simulated: return "simulated";
    case Stage::quantized: return "quantized";
    case Stage::hardware: return "hardware";
  }
  return "?";
}

SampleResponse response_from_output(const SpikeRaster& output) {
  if (output.n_channels() != 2) throw DimensionError("FRR needs exactly two output neurons");
  SampleResponse r;
  r.rate_n0 = firing_rate(output.data().col(0), output.dt());
  r.rate_n1 = firing_rate(output.data().col(1), output.dt());
  r.frr = frr(r.rate_n0, r.rate_n1);
  return r;
}

FRRReport evaluate(const Runner& run, const FrozenNoiseDataset& data, Stage stage,
                   long max_tests) {
  FRRReport rep;
  rep.stage = stage;
  for (int c = 0; c < 2; ++c) rep.targets[c] = response_from_output(run(data.targets[c]));
  std::size_t n = data.tests.size();
  if (max_tests >= 0) n = std::min(n, static_cast<std::size_t>(max_tests));
  rep.tests.resize(n);
  unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), 8u));
  if (n < 16) workers = 1;
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) rep.tests[i] = response_from_output(run(data.tests[i]));
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  if (n > 0) {
    rep.test_mean = SampleResponse{0.0, 0.0, 0.0};
    for (const auto& r : rep.tests) {
      rep.test_mean.rate_n0 += r.rate_n0;
      rep.test_mean.rate_n1 += r.rate_n1;
      rep.test_mean.frr += r.frr;
    }
    rep.test_mean.rate_n0 /= static_cast<double>(n);
    rep.test_mean.rate_n1 /= static_cast<double>(n);
    rep.test_mean.frr /= static_cast<double>(n);
    rep.test_max_frr = *std::max_element(rep.tests.begin(), rep.tests.end(),
                                         [](const auto& a, const auto& b) { return a.frr < b.frr; });
  }
  return rep;
}

std::string FRRReport::table() const {
  std::ostringstream os;
  char buf[160];
  auto row = [&](const char* name, const SampleResponse& r) {
    std::snprintf(buf, sizeof buf, "%-16s %8.1f %8.1f %8.2f\n", name, r.rate_n0, r.rate_n1, r.frr);
    os << buf;
  };
  os << "stage: " << stage_name(stage) << "\n";
  std::snprintf(buf, sizeof buf, "%-16s %8s %8s %8s\n", "input", "N0 (Hz)", "N1 (Hz)", "FRR");
  os << buf;
  row("FN class 0", targets[0]);
  row("FN class 1", targets[1]);
  if (!tests.empty()) {
    row("TEST (mean)", test_mean);
    row("TEST (max FRR)", test_max_frr);
  }
  return os.str();
}

void FRRReport::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  os.precision(10);
  os << "stage,sample,rate_n0_hz,rate_n1_hz,frr\n";
  auto line = [&](const std::string& name, const SampleResponse& r) {
    os << stage_name(stage) << ',' << name << ',' << r.rate_n0 << ',' << r.rate_n1 << ',' << r.frr
       << '\n';
  };
  line("target_0", targets[0]);
  line("target_1", targets[1]);
  for (std::size_t i = 0; i < tests.size(); ++i) line("test_" + std::to_string(i), tests[i]);
}

Runner simulation_runner(Network net, const EvolveOptions& options) {
  net.validate();
  return [net = std::move(net), options](const SpikeRaster& in) {
    return evolve(net, in, options).output;
  };
}

BenchResult bench_training(const Network& net, const FrozenNoiseDataset& data, TrainConfig cfg,
                           int warmup_epochs) {
  if (cfg.epochs < 1) throw ParameterError("benchmark needs at least one epoch");
  auto pairs = data.training_pairs();
  TrainConfig warm = cfg;
  warm.epochs = std::max(warmup_epochs, 1);
  train(net, pairs, warm);
  auto start = std::chrono::steady_clock::now();
  train(net, pairs, cfg);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {cfg.epochs, secs, cfg.epochs / secs};
}

std::string machine_info() {
  utsname u{};
  std::ostringstream os;
  if (uname(&u) == 0) os << u.sysname << ' ' << u.release << ' ' << u.machine;
  os << "; hardware threads: " << std::thread::hardware_concurrency();
  return os.str();
}

}  // namespace mixsnn

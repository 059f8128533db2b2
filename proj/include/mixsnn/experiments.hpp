#pragma once

#include "mixsnn/training.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mixsnn {

struct FrozenNoiseParams {
  double rate_hz = 50.0;
  double duration_s = 0.5;
  double dt = 1e-3;
  Index n_channels = 60;
  Index n_test = 1000;

  Index n_steps() const;
  void validate() const;
};

struct FrozenNoiseDataset {
  FrozenNoiseParams params;
  std::uint64_t seed = 0;
  std::array<SpikeRaster, 2> targets;
  std::vector<SpikeRaster> tests;

  std::vector<LabeledRaster> training_pairs() const {
    return {{targets[0], 0}, {targets[1], 1}};
  }
};

/// Independent Bernoulli(rate * dt) entries.
SpikeRaster poisson_raster(Index n_steps, Index n_channels, double rate_hz, double dt,
                           std::uint64_t seed);

/// Targets use seeds derived from `seed` and indices 0/1; test sample i
/// uses index 2 + i.
FrozenNoiseDataset generate_frozen_noise(const FrozenNoiseParams& params, std::uint64_t seed);

void save_dataset(const std::string& dir, const FrozenNoiseDataset& data);
FrozenNoiseDataset load_dataset(const std::string& dir);

/// Mean firing rate in Hz of a spike train sampled every `dt` seconds.
template <typename Derived>
double firing_rate(const Eigen::MatrixBase<Derived>& spikes, double dt) {
  if (spikes.size() == 0) throw ParameterError("firing rate undefined for an empty train");
  return spikes.template cast<double>().sum() / (dt * static_cast<double>(spikes.size()));
}

/// max(r0, r1) / min(r0, r1); infinity when exactly one rate is zero and 1
/// when both are.
double frr(double r0, double r1);

enum class Stage { simulated, quantized, hardware };
std::string stage_name(Stage s);

struct SampleResponse {
  double rate_n0 = 0.0;
  double rate_n1 = 0.0;
  double frr = 1.0;
  int winner() const { return rate_n0 >= rate_n1 ? 0 : 1; }
};

struct FRRReport {
  Stage stage = Stage::simulated;
  std::array<SampleResponse, 2> targets;
  std::vector<SampleResponse> tests;
  SampleResponse test_mean;     // mean rates, mean FRR
  SampleResponse test_max_frr;  // sample with the largest FRR

  std::string table() const;
  void write_csv(const std::string& path) const;
};

SampleResponse response_from_output(const SpikeRaster& output);

/// Anything that maps an input raster onto a two-neuron output raster.
using Runner = std::function<SpikeRaster(const SpikeRaster&)>;

/// Runs both targets and up to `max_tests` test samples (all when < 0).
FRRReport evaluate(const Runner& run, const FrozenNoiseDataset& data, Stage stage,
                   long max_tests = -1);

/// Runner for a simulated network, optionally under a frozen mismatch draw.
Runner simulation_runner(Network net, const EvolveOptions& options = {});

struct BenchResult {
  int epochs = 0;
  double seconds = 0.0;
  double epochs_per_second = 0.0;
};

/// Times full training epochs (forward + backward + update over the two
/// targets) after a short warm-up.
BenchResult bench_training(const Network& net, const FrozenNoiseDataset& data, TrainConfig cfg,
                           int warmup_epochs = 50);

std::string machine_info();

}  // namespace mixsnn

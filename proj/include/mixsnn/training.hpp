#pragma once

#include "mixsnn/mismatch.hpp"
#include "mixsnn/neuron.hpp"
#include "mixsnn/optim.hpp"

#include <functional>
#include <set>
#include <string>
#include <vector>

namespace mixsnn {

/// Mean squared error between two spike trains, averaged over every time
/// step and channel.
template <typename A, typename B>
double mse_spike_loss(const Eigen::MatrixBase<A>& y_out, const Eigen::MatrixBase<B>& y_target) {
  if (y_out.rows() != y_target.rows() || y_out.cols() != y_target.cols()) {
    throw DimensionError("loss operands differ in shape");
  }
  if (y_out.size() == 0) return 0.0;
  return (y_out.template cast<double>() - y_target.template cast<double>()).squaredNorm() /
         static_cast<double>(y_out.size());
}

double mse_spike_loss(const SpikeRaster& y_out, const SpikeRaster& y_target);

/// Target train: the `class_index` column spikes every step, the rest never.
SpikeRaster make_target(int class_index, Index n_steps, Index n_channels = 2, double dt = 1e-3);

struct SurrogateSpike {
  double spike;
  double derivative;
};

/// Hard step forward, fast-sigmoid derivative backward at
/// x = ratio - 1: slope / (4 * (1 + slope * |x|)^2).
inline SurrogateSpike surrogate_spike(double ratio, double slope) {
  double x = ratio - 1.0;
  double d = 1.0 + slope * std::abs(x);
  return {ratio >= 1.0 ? 1.0 : 0.0, slope / (4.0 * d * d)};
}

/// Integral of the surrogate derivative through 0.5 at threshold. Used in
/// place of the hard step when checking gradients against finite
/// differences.
inline double smooth_spike(double ratio, double slope) {
  double x = ratio - 1.0;
  return 0.5 + slope * x / (4.0 * (1.0 + slope * std::abs(x)));
}

enum class ForwardMode {
  hard,    // binary spikes, refractory counter, surrogate backward
  smooth,  // smooth_spike forward, no refractory period; exact gradients
};

struct BpttOptions {
  double surrogate_slope = 10.0;
  ForwardMode mode = ForwardMode::hard;
  PhysicalConstants constants{};
};

struct LossGradient {
  double loss = 0.0;
  MatrixXd w_in;
  MatrixXd w_rec;
  /// Forward output; binary in hard mode.
  MatrixXd output;
};

/// Forward pass plus backpropagation through time for one input raster
/// against a (n_steps x n_neurons) target.
LossGradient loss_and_gradient(const Network& net, const SpikeRaster& input,
                               const MatrixXd& target, const BpttOptions& options = {});

/// Same forward pass without the backward sweep.
double forward_loss(const Network& net, const SpikeRaster& input, const MatrixXd& target,
                    const BpttOptions& options = {});

struct LabeledRaster {
  SpikeRaster raster;
  int label = 0;
};

/// Averaged over the batch.
LossGradient batch_loss_and_gradient(const Network& net, std::span<const LabeledRaster> batch,
                                     const BpttOptions& options = {});

/// Defaults are the frozen-noise toy settings.
struct TrainConfig {
  int epochs = 60000;
  double learning_rate = 3e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double surrogate_slope = 10.0;
  /// "w_in" and/or "w_rec".
  std::set<std::string> trainable{"w_in", "w_rec"};
  bool mismatch_enabled = true;
  /// Perturbs the trained weights; the virtual device perturbs everything.
  MismatchSpec mismatch{.targets = MismatchSpec::weight_targets()};
  /// Weights are clipped to [-weight_limit, weight_limit] after every update
  /// so they stay representable by the base-weight currents; <= 0 disables.
  double weight_limit = 40.0;
  /// Separate clip for the recurrent weights; <= 0 disables.
  double recurrent_limit = 1.0;
  /// Relative adversarial step; 0 disables the adversarial mode.
  double adversarial_step = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_eps}; }
};

struct LossRecord {
  std::vector<double> loss;
  Network final_params;
};

/// Called after every epoch with (epoch, loss, updated nominal parameters);
/// return false to stop early.
using EpochCallback = std::function<bool(int, double, const Network&)>;

/// Full-batch training of the weights. Throws NumericalError naming the
/// epoch if the loss diverges.
LossRecord train(const Network& initial, std::span<const LabeledRaster> dataset,
                 const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Random initial weights for a fresh network: input weights drawn from
/// N(mean, std), recurrent weights from N(0, rec_std).
struct WeightInit {
  double in_mean = 0.12;
  double in_std = 0.03;
  double rec_std = 0.01;
};
Network init_network(Index n_inputs, Index n_neurons, const SimParams& params, std::uint64_t seed,
                     const WeightInit& init = {});

}  // namespace mixsnn

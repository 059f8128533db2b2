#pragma once

#include "mixsnn/params.hpp"
#include "mixsnn/raster.hpp"

#include <optional>
#include <vector>

namespace mixsnn {

enum class Integrator {
  /// Decay by exp(-dt/tau); unconditionally stable.
  exponential_euler,
  /// Decay by (1 - dt/tau). Kept for comparison; requires dt <= tau.
  forward_euler,
};

/// Per-neuron update coefficients derived once from a SimParams.
struct NeuronCoefficients {
  double mem_decay = 0.0;
  double mem_input = 0.0;  // multiplies (Igain_mem / Itau_mem) * Iin
  double mem_gain = 0.0;
  double threshold = 0.0;
  double reset = 0.0;
  double dc = 0.0;
  std::array<double, kSynapseCount> syn_decay{};
  /// Current injected by one spike through a unit weight (the AHP entry is
  /// the adaptation jump on the neuron's own spike).
  std::array<double, kSynapseCount> syn_jump{};
  int refractory_steps = 0;

  static NeuronCoefficients from(const SimParams& p, const PhysicalConstants& k = {},
                                 Integrator integrator = Integrator::exponential_euler);
};

/// Refractory period in whole steps, round-half-up.
int refractory_steps(const SimParams& p, const PhysicalConstants& k = {});

struct NeuronState {
  double Imem = kCurrentFloor;
  std::array<double, kSynapseCount> Isyn{kCurrentFloor, kCurrentFloor, kCurrentFloor,
                                         kCurrentFloor, kCurrentFloor};
  int refractory_remaining = 0;
  bool spike_out = false;

  double Iahp() const { return Isyn[static_cast<int>(Synapse::ahp)]; }
  double& syn(Synapse s) { return Isyn[static_cast<std::size_t>(s)]; }
  double syn(Synapse s) const { return Isyn[static_cast<std::size_t>(s)]; }
  bool operator==(const NeuronState&) const = default;
};

/// Weighted afferent activity of one step per synapse type: sum over
/// incoming spikes of the connection's weight magnitude. The AHP entry is
/// ignored; adaptation is driven by the neuron's own spike.
using SynapticDrive = std::array<double, kSynapseCount>;

/// Soma input current for the given synaptic state.
double soma_input(const NeuronState& s, const NeuronCoefficients& c);

/// Advances one neuron by one time step and returns the new state; the
/// emitted spike is in `spike_out`. Throws NumericalError on non-finite
/// state.
NeuronState step(const NeuronState& state, const SynapticDrive& drive,
                 const NeuronCoefficients& coeff);

/// Single recurrent layer as executed on one set of cores: external inputs
/// through `w_in`, previous-step output spikes through `w_rec`. Positive
/// weights drive AMPA, negative weights drive GABA.
struct Network {
  MatrixXd w_in;                   // n_inputs x n_neurons
  MatrixXd w_rec;                  // n_neurons x n_neurons
  std::vector<SimParams> params;   // one per neuron

  Index n_inputs() const { return w_in.rows(); }
  Index n_neurons() const { return w_rec.rows(); }
  double dt() const;

  /// Throws DimensionError or ValidationError.
  void validate() const;
};

/// Every neuron gets a copy of `params`.
Network make_network(MatrixXd w_in, MatrixXd w_rec, const SimParams& params);

struct EvolveOptions {
  PhysicalConstants constants{};
  Integrator integrator = Integrator::exponential_euler;
  bool record = false;
};

/// State traces, time along rows and neurons along columns.
struct StateTraces {
  MatrixXd Imem, Iin, Iampa, Igaba, Iahp;
};

struct EvolveResult {
  SpikeRaster output;
  std::vector<NeuronState> final_state;
  std::optional<StateTraces> traces;
};

/// Runs the network over an input raster. `initial` defaults to the rest
/// state for every neuron.
EvolveResult evolve(const Network& net, const SpikeRaster& input, const EvolveOptions& options = {},
                    std::vector<NeuronState> initial = {});

}  // namespace mixsnn

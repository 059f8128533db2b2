#pragma once

#include "mixsnn/neuron.hpp"

#include <variant>
#include <vector>

namespace mixsnn {

enum class NeuronModel { dynapsim, lif };

std::string_view model_name(NeuronModel m);
NeuronModel model_from_name(std::string_view name);

/// Generic leaky integrate-and-fire description. `threshold` is relative to
/// the DynapSim spike threshold current of the conversion template.
struct LifParams {
  double tau_mem = 20e-3;
  double tau_syn = 10e-3;
  double t_ref = 4e-3;
  double threshold = 1.0;
  double dt = 1e-3;

  void validate() const;
  bool operator==(const LifParams&) const = default;
};

/// DynapSim currents that realise a LIF neuron: time constants become
/// leakage currents by inverting derive_time_constant, the remaining
/// currents come from `base`.
SimParams lif_to_dynapsim(const LifParams& lif, const BehaviorTargets& base = {},
                          const PhysicalConstants& k = {});

// ---------------------------------------------------------------------------
// Sequential network description

struct LinearModule {
  MatrixXd weights;  // inputs x outputs
};

struct NeuronModule {
  NeuronModel model = NeuronModel::dynapsim;
  std::vector<SimParams> params;  // one per neuron (dynapsim)
  LifParams lif;                  // (lif)
  Index size = 0;
  /// size x size; all zero when the layer has no recurrence.
  MatrixXd w_rec;
};

using Module = std::variant<LinearModule, NeuronModule>;

/// Alternating Linear / Neuron modules starting with a Linear module.
struct NetSpec {
  std::vector<Module> modules;

  Index n_inputs() const;
  Index n_layers() const { return static_cast<Index>(modules.size() / 2); }
  const LinearModule& weights(Index layer) const;
  const NeuronModule& neurons(Index layer) const;
  /// Throws ValidationError naming the first broken module boundary.
  void validate() const;
};

/// One-layer description of a simulated network.
NetSpec spec_from_network(const Network& net);

/// Reference simulator for a multi-layer spec: layer k + 1 receives the
/// spikes layer k emitted on the previous step (one step of delay per hop).
/// Returns the spikes of every layer, concatenated along the columns.
SpikeRaster evolve_layered(const NetSpec& spec, const SpikeRaster& input,
                           const EvolveOptions& options = {});

// ---------------------------------------------------------------------------
// Graph

struct LinearWeightsNode {
  MatrixXd weights;  // rows = source tags, cols = destination tags
  std::vector<int> source_tags;
  std::vector<int> dest_tags;
  bool recurrent = false;
};

struct DynapseNeuronsNode {
  NeuronModel model = NeuronModel::dynapsim;
  std::vector<int> tags;
  std::vector<SimParams> params;  // parallel to tags (dynapsim)
  LifParams lif;                  // (lif)
};

using GraphNode = std::variant<LinearWeightsNode, DynapseNeuronsNode>;

struct GraphEdge {
  int from = 0;
  int to = 0;
  bool operator==(const GraphEdge&) const = default;
};

/// Tags are dense integers: the external input channels first, then the
/// neurons of every layer in order.
struct NetGraph {
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;  // output-of -> input-of, node indices
  std::vector<int> input_tags;   // the external input node
  int input_node = 0;            // the node fed by the external inputs

  /// Throws ValidationError.
  void validate() const;
};

/// Node order: for every layer the input weights, the neurons and the
/// recurrent weights (flagged recurrent, always present).
NetGraph as_graph(const NetSpec& spec);

/// Inverse of as_graph. A graph whose first neuron node has no incoming
/// weights gets an identity input layer of matching width.
NetSpec net_from_graph(const NetGraph& graph);

/// Replaces every LIF neuron node by its DynapSim equivalent.
NetGraph convert_to_dynapsim(const NetGraph& graph, const BehaviorTargets& base = {},
                             const PhysicalConstants& k = {});

}  // namespace mixsnn

#pragma once

#include "mixsnn/graph.hpp"

#include <vector>

namespace mixsnn {

struct HardwareLimits {
  int neurons_per_core = 256;
  int cores_per_chip = 4;
  int synapses_per_neuron = 64;
  int chips_available = 1;
  int weight_bits = 4;
  int n_base_weights = 4;

  int total_cores() const { return cores_per_chip * chips_available; }
  int total_neurons() const { return neurons_per_core * total_cores(); }
  void validate() const;
};

struct CoreAddress {
  int chip = 0;
  int core = 0;
  auto operator<=>(const CoreAddress&) const = default;
};

struct CoreParams {
  CoreAddress address;
  SimParams params;
  int cluster = 0;
};

/// The network projected onto the chip. Virtual tags are the external input
/// channels (0..n_inputs-1); hardware tags index the merged neuron axis
/// (0..n_neurons-1), contiguous per layer.
struct HardwareSpec {
  MatrixXd w_in;   // virtual x hardware
  MatrixXd w_rec;  // hardware x hardware
  std::vector<int> virtual_tags;
  std::vector<int> hardware_tags;
  std::vector<CoreAddress> core_assignment;  // per hardware tag
  std::vector<int> cluster_of;               // per hardware tag
  std::vector<CoreParams> cores;             // occupied cores, in address order

  Index n_inputs() const { return w_in.rows(); }
  Index n_neurons() const { return w_rec.rows(); }
  int n_clusters() const;
  const SimParams& params_of(Index hardware_tag) const;
  /// Columns of the hardware tags in one cluster.
  std::vector<Index> cluster_members(int cluster) const;

  void validate(const HardwareLimits& limits = {}) const;
  /// The single-layer network the chip executes.
  Network network() const;
};

/// Merges the chain into one input matrix and one recurrent matrix (feed-
/// forward blocks sit off the diagonal, one step of delay per hop), groups
/// layers with identical parameters into clusters and packs the clusters
/// first-fit onto cores. Throws MappingError naming the violated limit.
HardwareSpec map_graph(const NetGraph& graph, const HardwareLimits& limits = {});

/// Non-zero afferents of one hardware neuron across w_in and w_rec.
int fan_in(const HardwareSpec& spec, Index hardware_tag);

}  // namespace mixsnn

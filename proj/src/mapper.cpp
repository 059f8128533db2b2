#include "mixsnn/mapper.hpp"

#include <algorithm>
#include <sstream>

namespace mixsnn {

namespace {

std::string list_tags(const std::vector<Index>& tags) {
  std::ostringstream os;
  for (std::size_t i = 0; i < tags.size(); ++i) os << (i ? ", " : "") << tags[i];
  return os.str();
}

}  // namespace

void HardwareLimits::validate() const {
  if (neurons_per_core < 1 || cores_per_chip < 1 || synapses_per_neuron < 1 || chips_available < 1 ||
      weight_bits < 1 || n_base_weights < 1) {
    throw ParameterError("hardware limits must all be positive");
  }
  if (weight_bits != n_base_weights) throw ParameterError("one mask bit per base weight is required");
}

int HardwareSpec::n_clusters() const {
  return cluster_of.empty() ? 0 : *std::max_element(cluster_of.begin(), cluster_of.end()) + 1;
}

const SimParams& HardwareSpec::params_of(Index hardware_tag) const {
  const CoreAddress& a = core_assignment.at(static_cast<std::size_t>(hardware_tag));
  for (const auto& c : cores) {
    if (c.address == a) return c.params;
  }
  throw ValidationError("hardware tag " + std::to_string(hardware_tag) + " sits on an unconfigured core");
}

std::vector<Index> HardwareSpec::cluster_members(int cluster) const {
  std::vector<Index> out;
  for (std::size_t i = 0; i < cluster_of.size(); ++i) {
    if (cluster_of[i] == cluster) out.push_back(static_cast<Index>(i));
  }
  return out;
}

int fan_in(const HardwareSpec& spec, Index j) {
  return static_cast<int>((spec.w_in.col(j).array() != 0.0).count() +
                          (spec.w_rec.col(j).array() != 0.0).count());
}

void HardwareSpec::validate(const HardwareLimits& limits) const {
  limits.validate();
  const Index n = n_neurons();
  if (n == 0) throw ValidationError("hardware spec has no neurons");
  if (w_rec.cols() != n) throw DimensionError("w_rec must be square");
  if (w_in.cols() != n) throw DimensionError("w_in columns must match the hardware neurons");
  if (static_cast<Index>(virtual_tags.size()) != w_in.rows() || static_cast<Index>(hardware_tags.size()) != n ||
      static_cast<Index>(core_assignment.size()) != n || static_cast<Index>(cluster_of.size()) != n) {
    throw ValidationError("hardware spec tag lists do not match its matrices");
  }
  std::vector<Index> over;
  for (Index j = 0; j < n; ++j) {
    if (fan_in(*this, j) > limits.synapses_per_neuron) over.push_back(j);
  }
  if (!over.empty()) {
    throw MappingError("fan-in above " + std::to_string(limits.synapses_per_neuron) +
                       " synapses at hardware tags " + list_tags(over));
  }
  for (Index j = 0; j < n; ++j) {
    const SimParams& p = params_of(j);
    p.validate();
    for (const auto& c : cores) {
      if (c.address == core_assignment[static_cast<std::size_t>(j)] && c.cluster != cluster_of[static_cast<std::size_t>(j)]) {
        throw ValidationError("hardware tag " + std::to_string(j) + " cluster disagrees with its core");
      }
    }
  }
}

Network HardwareSpec::network() const {
  std::vector<SimParams> params;
  params.reserve(static_cast<std::size_t>(n_neurons()));
  for (Index j = 0; j < n_neurons(); ++j) params.push_back(params_of(j));
  Network net{w_in, w_rec, std::move(params)};
  net.validate();
  return net;
}

HardwareSpec map_graph(const NetGraph& graph, const HardwareLimits& limits) {
  limits.validate();
  NetSpec spec = net_from_graph(graph);

  // Layer offsets on the merged neuron axis.
  const Index n_layers = spec.n_layers();
  std::vector<Index> offset(static_cast<std::size_t>(n_layers) + 1, 0);
  for (Index l = 0; l < n_layers; ++l) {
    const NeuronModule& n = spec.neurons(l);
    if (n.model != NeuronModel::dynapsim) {
      throw MappingError("layer " + std::to_string(l) + " uses the LIF model; convert it to DynapSim first");
    }
    offset[static_cast<std::size_t>(l) + 1] = offset[static_cast<std::size_t>(l)] + n.size;
  }
  const Index total = offset.back();
  if (total > limits.total_neurons()) {
    throw MappingError("capacity exceeded: " + std::to_string(total) + " neurons for " +
                       std::to_string(limits.total_neurons()) + " available on " +
                       std::to_string(limits.chips_available) + " chip(s)");
  }

  HardwareSpec hw;
  hw.w_in = MatrixXd::Zero(spec.n_inputs(), total);
  hw.w_rec = MatrixXd::Zero(total, total);
  hw.w_in.leftCols(spec.neurons(0).size) = spec.weights(0).weights;
  for (Index l = 0; l < n_layers; ++l) {
    const Index o = offset[static_cast<std::size_t>(l)];
    const Index s = spec.neurons(l).size;
    hw.w_rec.block(o, o, s, s) = spec.neurons(l).w_rec;
    if (l > 0) {
      const Index prev = offset[static_cast<std::size_t>(l) - 1];
      hw.w_rec.block(prev, o, spec.neurons(l - 1).size, s) = spec.weights(l).weights;
    }
  }
  for (Index i = 0; i < spec.n_inputs(); ++i) hw.virtual_tags.push_back(static_cast<int>(i));
  for (Index j = 0; j < total; ++j) hw.hardware_tags.push_back(static_cast<int>(j));

  // Clusters: layers with identical parameters, numbered by first layer.
  std::vector<SimParams> cluster_params;
  std::vector<Index> cluster_size;
  std::vector<int> layer_cluster;
  for (Index l = 0; l < n_layers; ++l) {
    const auto& params = spec.neurons(l).params;
    if (std::any_of(params.begin(), params.end(), [&](const SimParams& p) { return !(p == params.front()); })) {
      throw MappingError("layer " + std::to_string(l) +
                         " mixes parameter sets; neurons of one core must share parameters");
    }
    auto it = std::find(cluster_params.begin(), cluster_params.end(), params.front());
    int c = static_cast<int>(it - cluster_params.begin());
    if (it == cluster_params.end()) {
      cluster_params.push_back(params.front());
      cluster_size.push_back(0);
    }
    cluster_size[static_cast<std::size_t>(c)] += spec.neurons(l).size;
    layer_cluster.push_back(c);
  }

  // First-fit packing: every cluster takes whole cores, in cluster order.
  std::vector<int> first_core(cluster_params.size());
  int next_core = 0;
  for (std::size_t c = 0; c < cluster_params.size(); ++c) {
    first_core[c] = next_core;
    int need = static_cast<int>((cluster_size[c] + limits.neurons_per_core - 1) / limits.neurons_per_core);
    next_core += need;
  }
  if (next_core > limits.total_cores()) {
    throw MappingError("cluster count exceeded: " + std::to_string(cluster_params.size()) +
                       " parameter clusters need " + std::to_string(next_core) + " cores, " +
                       std::to_string(limits.total_cores()) + " available");
  }
  std::vector<Index> placed(cluster_params.size(), 0);
  for (Index l = 0; l < n_layers; ++l) {
    const int c = layer_cluster[static_cast<std::size_t>(l)];
    for (Index k = 0; k < spec.neurons(l).size; ++k) {
      const Index slot = placed[static_cast<std::size_t>(c)]++;
      const int core = first_core[static_cast<std::size_t>(c)] + static_cast<int>(slot / limits.neurons_per_core);
      hw.core_assignment.push_back({core / limits.cores_per_chip, core % limits.cores_per_chip});
      hw.cluster_of.push_back(c);
    }
  }
  for (std::size_t c = 0; c < cluster_params.size(); ++c) {
    const int used = static_cast<int>((cluster_size[c] + limits.neurons_per_core - 1) / limits.neurons_per_core);
    for (int k = 0; k < used; ++k) {
      const int core = first_core[c] + k;
      hw.cores.push_back({{core / limits.cores_per_chip, core % limits.cores_per_chip},
                          cluster_params[c],
                          static_cast<int>(c)});
    }
  }
  hw.validate(limits);
  return hw;
}

}  // namespace mixsnn

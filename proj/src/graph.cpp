#include "mixsnn/graph.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace mixsnn {

namespace {

template <typename T>
const T* as(const GraphNode& n) {
  return std::get_if<T>(&n);
}

std::vector<int> iota_tags(int first, Index count) {
  std::vector<int> t(static_cast<std::size_t>(count));
  std::iota(t.begin(), t.end(), first);
  return t;
}

std::string boundary(std::size_t i) { return "module " + std::to_string(i); }

}  // namespace

std::string_view model_name(NeuronModel m) { return m == NeuronModel::lif ? "lif" : "dynapsim"; }

NeuronModel model_from_name(std::string_view name) {
  if (name == "dynapsim") return NeuronModel::dynapsim;
  if (name == "lif") return NeuronModel::lif;
  throw ValidationError("unknown neuron model: " + std::string(name));
}

void LifParams::validate() const {
  if (!(tau_mem > 0.0 && tau_syn > 0.0 && t_ref >= 0.0 && threshold > 0.0 && dt > 0.0)) {
    throw ParameterError("LIF time constants, threshold and dt must be positive");
  }
}

SimParams lif_to_dynapsim(const LifParams& lif, const BehaviorTargets& base,
                          const PhysicalConstants& k) {
  lif.validate();
  BehaviorTargets t = base;
  t.tau_mem = lif.tau_mem;
  t.tau_syn[static_cast<int>(Synapse::ampa)] = lif.tau_syn;
  t.tau_syn[static_cast<int>(Synapse::gaba)] = lif.tau_syn;
  t.t_ref = lif.t_ref;
  t.threshold = base.threshold * lif.threshold;
  t.dt = lif.dt;
  return make_params(t, k);
}

// ---------------------------------------------------------------------------

Index NetSpec::n_inputs() const {
  if (modules.empty()) throw ValidationError("network has no modules");
  const auto* lin = std::get_if<LinearModule>(&modules.front());
  if (!lin) throw ValidationError("module 0 must hold the input weights");
  return lin->weights.rows();
}

const LinearModule& NetSpec::weights(Index layer) const {
  return std::get<LinearModule>(modules.at(static_cast<std::size_t>(2 * layer)));
}

const NeuronModule& NetSpec::neurons(Index layer) const {
  return std::get<NeuronModule>(modules.at(static_cast<std::size_t>(2 * layer + 1)));
}

void NetSpec::validate() const {
  if (modules.empty()) throw ValidationError("network has no modules");
  if (modules.size() % 2 != 0) {
    throw ValidationError("network must end with a neuron module (" + boundary(modules.size() - 1) + ")");
  }
  Index width = -1;
  for (std::size_t i = 0; i < modules.size(); ++i) {
    if (i % 2 == 0) {
      const auto* lin = std::get_if<LinearModule>(&modules[i]);
      if (!lin) throw ValidationError(boundary(i) + " must be a linear module");
      if (lin->weights.size() == 0) throw ValidationError(boundary(i) + " has an empty weight matrix");
      if (width >= 0 && lin->weights.rows() != width) {
        throw ValidationError("shape chain broken between " + boundary(i - 1) + " and " + boundary(i) +
                              ": " + std::to_string(width) + " outputs feed " +
                              std::to_string(lin->weights.rows()) + " inputs");
      }
      width = lin->weights.cols();
    } else {
      const auto* neu = std::get_if<NeuronModule>(&modules[i]);
      if (!neu) throw ValidationError(boundary(i) + " must be a neuron module");
      if (neu->size != width) {
        throw ValidationError("shape chain broken between " + boundary(i - 1) + " and " + boundary(i) +
                              ": " + std::to_string(width) + " weights feed " +
                              std::to_string(neu->size) + " neurons");
      }
      if (neu->w_rec.rows() != neu->size || neu->w_rec.cols() != neu->size) {
        throw ValidationError(boundary(i) + " recurrent matrix is not " + std::to_string(neu->size) +
                              "x" + std::to_string(neu->size));
      }
      if (neu->model == NeuronModel::dynapsim) {
        if (static_cast<Index>(neu->params.size()) != neu->size) {
          throw ValidationError(boundary(i) + " needs one parameter set per neuron");
        }
        for (const auto& p : neu->params) p.validate();
      } else {
        neu->lif.validate();
      }
    }
  }
}

NetSpec spec_from_network(const Network& net) {
  net.validate();
  NeuronModule n;
  n.params = net.params;
  n.size = net.n_neurons();
  n.w_rec = net.w_rec;
  return NetSpec{{LinearModule{net.w_in}, std::move(n)}};
}

SpikeRaster evolve_layered(const NetSpec& spec, const SpikeRaster& input,
                           const EvolveOptions& options) {
  spec.validate();
  if (input.n_channels() != spec.n_inputs()) {
    throw DimensionError("input has " + std::to_string(input.n_channels()) + " channels, network expects " +
                         std::to_string(spec.n_inputs()));
  }
  EvolveOptions opt = options;
  opt.record = false;
  Index total = 0;
  for (Index l = 0; l < spec.n_layers(); ++l) total += spec.neurons(l).size;

  SpikeMatrix all = SpikeMatrix::Zero(input.n_steps(), total);
  SpikeRaster feed = input;
  Index col = 0;
  for (Index l = 0; l < spec.n_layers(); ++l) {
    const NeuronModule& n = spec.neurons(l);
    if (n.model != NeuronModel::dynapsim) {
      throw ValidationError("layer " + std::to_string(l) + " is LIF; convert it to DynapSim first");
    }
    Network net{spec.weights(l).weights, n.w_rec, n.params};
    SpikeRaster out = evolve(net, feed, opt).output;
    all.middleCols(col, n.size) = out.data();
    col += n.size;
    // The next layer sees these spikes one step later.
    SpikeMatrix delayed = SpikeMatrix::Zero(out.n_steps(), out.n_channels());
    if (out.n_steps() > 1) delayed.bottomRows(out.n_steps() - 1) = out.data().topRows(out.n_steps() - 1);
    feed = SpikeRaster(std::move(delayed), input.dt());
  }
  return SpikeRaster(std::move(all), input.dt());
}

// ---------------------------------------------------------------------------

NetGraph as_graph(const NetSpec& spec) {
  spec.validate();
  NetGraph g;
  g.input_tags = iota_tags(0, spec.n_inputs());
  std::vector<int> source = g.input_tags;
  int next_tag = static_cast<int>(spec.n_inputs());
  for (Index l = 0; l < spec.n_layers(); ++l) {
    const NeuronModule& n = spec.neurons(l);
    std::vector<int> tags = iota_tags(next_tag, n.size);
    next_tag += static_cast<int>(n.size);

    const int lin = static_cast<int>(g.nodes.size());
    g.nodes.emplace_back(LinearWeightsNode{spec.weights(l).weights, source, tags, false});
    g.nodes.emplace_back(DynapseNeuronsNode{n.model, tags, n.params, n.lif});
    g.nodes.emplace_back(LinearWeightsNode{n.w_rec, tags, tags, true});
    g.edges.push_back({lin, lin + 1});
    g.edges.push_back({lin + 1, lin + 2});
    g.edges.push_back({lin + 2, lin + 1});
    if (l > 0) g.edges.push_back({lin - 2, lin});
    source = tags;
  }
  return g;
}

namespace {

/// The validated chain of a graph: per layer the input-weight node (or -1),
/// the neuron node and the recurrent node (or -1).
struct Chain {
  struct Layer {
    int weights = -1;
    int neurons = -1;
    int recurrent = -1;
  };
  std::vector<Layer> layers;
};

Chain walk(const NetGraph& g) {
  const int n_nodes = static_cast<int>(g.nodes.size());
  if (n_nodes == 0) throw ValidationError("graph has no nodes");
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n_nodes)), in(out.size());
  for (const auto& e : g.edges) {
    if (e.from < 0 || e.from >= n_nodes || e.to < 0 || e.to >= n_nodes) {
      throw ValidationError("dangling edge " + std::to_string(e.from) + " -> " + std::to_string(e.to));
    }
    out[static_cast<std::size_t>(e.from)].push_back(e.to);
    in[static_cast<std::size_t>(e.to)].push_back(e.from);
  }
  if (g.input_node < 0 || g.input_node >= n_nodes) throw ValidationError("input node index out of range");

  // Tag bookkeeping.
  std::set<int> seen;
  for (int t : g.input_tags) {
    if (!seen.insert(t).second) throw ValidationError("duplicate input tag " + std::to_string(t));
  }
  for (int i = 0; i < n_nodes; ++i) {
    const auto* neu = as<DynapseNeuronsNode>(g.nodes[static_cast<std::size_t>(i)]);
    if (!neu) continue;
    if (neu->tags.empty()) throw ValidationError("neuron node " + std::to_string(i) + " has no neurons");
    if (neu->model == NeuronModel::dynapsim && neu->params.size() != neu->tags.size()) {
      throw ValidationError("neuron node " + std::to_string(i) + " needs one parameter set per tag");
    }
    for (int t : neu->tags) {
      if (!seen.insert(t).second) throw ValidationError("tag " + std::to_string(t) + " is not unique");
    }
  }
  for (int i = 0; i < n_nodes; ++i) {
    const auto* lin = as<LinearWeightsNode>(g.nodes[static_cast<std::size_t>(i)]);
    if (!lin) continue;
    if (lin->weights.rows() != static_cast<Index>(lin->source_tags.size()) ||
        lin->weights.cols() != static_cast<Index>(lin->dest_tags.size())) {
      throw ValidationError("weight node " + std::to_string(i) + " shape does not match its tag lists");
    }
  }

  auto only = [&](const std::vector<int>& v, int node, const char* what) {
    if (v.size() != 1) {
      throw ValidationError("node " + std::to_string(node) + " must have exactly one " + what + " edge");
    }
    return v.front();
  };

  Chain chain;
  std::vector<bool> visited(static_cast<std::size_t>(n_nodes), false);
  auto visit = [&](int node) {
    if (visited[static_cast<std::size_t>(node)]) {
      throw ValidationError("cycle through node " + std::to_string(node) + " outside a recurrent block");
    }
    visited[static_cast<std::size_t>(node)] = true;
  };

  int node = g.input_node;
  std::vector<int> source = g.input_tags;
  for (;;) {
    Chain::Layer layer;
    const auto* lin = as<LinearWeightsNode>(g.nodes[static_cast<std::size_t>(node)]);
    if (lin) {
      if (lin->recurrent) throw ValidationError("node " + std::to_string(node) + " is recurrent but feeds forward");
      if (lin->source_tags != source) {
        throw ValidationError("weight node " + std::to_string(node) + " source tags do not match its producer");
      }
      visit(node);
      layer.weights = node;
      node = only(out[static_cast<std::size_t>(node)], node, "outgoing");
    } else if (!chain.layers.empty()) {
      throw ValidationError("neuron node " + std::to_string(node) + " follows neurons without weights");
    }
    const auto* neu = as<DynapseNeuronsNode>(g.nodes[static_cast<std::size_t>(node)]);
    if (!neu) throw ValidationError("node " + std::to_string(node) + " should hold neurons");
    if (lin && lin->dest_tags != neu->tags) {
      throw ValidationError("weight node " + std::to_string(layer.weights) +
                            " destination tags do not match neuron node " + std::to_string(node));
    }
    if (!lin && source.size() != neu->tags.size()) {
      throw ValidationError("identity input needs " + std::to_string(neu->tags.size()) + " input tags");
    }
    visit(node);
    layer.neurons = node;

    int forward = -1;
    for (int succ : out[static_cast<std::size_t>(node)]) {
      const auto* w = as<LinearWeightsNode>(g.nodes[static_cast<std::size_t>(succ)]);
      if (!w) throw ValidationError("neuron node " + std::to_string(node) + " feeds a neuron node directly");
      if (w->recurrent) {
        if (layer.recurrent >= 0) throw ValidationError("neuron node " + std::to_string(node) + " has two recurrent blocks");
        if (w->source_tags != neu->tags || w->dest_tags != neu->tags) {
          throw ValidationError("recurrent node " + std::to_string(succ) + " tags do not match its neurons");
        }
        if (out[static_cast<std::size_t>(succ)] != std::vector<int>{node} ||
            in[static_cast<std::size_t>(succ)] != std::vector<int>{node}) {
          throw ValidationError("recurrent node " + std::to_string(succ) + " must loop on one neuron node");
        }
        visit(succ);
        layer.recurrent = succ;
      } else {
        if (forward >= 0) throw ValidationError("branching after neuron node " + std::to_string(node));
        forward = succ;
      }
    }
    chain.layers.push_back(layer);
    if (forward < 0) break;
    source = neu->tags;
    node = forward;
  }
  for (int i = 0; i < n_nodes; ++i) {
    if (!visited[static_cast<std::size_t>(i)]) {
      throw ValidationError("node " + std::to_string(i) + " is not reachable from the input");
    }
  }
  return chain;
}

}  // namespace

void NetGraph::validate() const { walk(*this); }

NetSpec net_from_graph(const NetGraph& graph) {
  Chain chain = walk(graph);
  NetSpec spec;
  for (const auto& layer : chain.layers) {
    const auto& neu = std::get<DynapseNeuronsNode>(graph.nodes[static_cast<std::size_t>(layer.neurons)]);
    const Index n = static_cast<Index>(neu.tags.size());
    MatrixXd w = layer.weights >= 0
                     ? std::get<LinearWeightsNode>(graph.nodes[static_cast<std::size_t>(layer.weights)]).weights
                     : MatrixXd::Identity(n, n);
    MatrixXd rec = layer.recurrent >= 0
                       ? std::get<LinearWeightsNode>(graph.nodes[static_cast<std::size_t>(layer.recurrent)]).weights
                       : MatrixXd::Zero(n, n);
    spec.modules.emplace_back(LinearModule{std::move(w)});
    spec.modules.emplace_back(NeuronModule{neu.model, neu.params, neu.lif, n, std::move(rec)});
  }
  spec.validate();
  return spec;
}

NetGraph convert_to_dynapsim(const NetGraph& graph, const BehaviorTargets& base,
                             const PhysicalConstants& k) {
  NetGraph out = graph;
  for (auto& node : out.nodes) {
    auto* neu = std::get_if<DynapseNeuronsNode>(&node);
    if (!neu || neu->model != NeuronModel::lif) continue;
    neu->params.assign(neu->tags.size(), lif_to_dynapsim(neu->lif, base, k));
    neu->model = NeuronModel::dynapsim;
  }
  return out;
}

}  // namespace mixsnn

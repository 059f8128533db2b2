#include "mixsnn/io.hpp"

#include <fstream>
#include <limits>
#include <map>

namespace mixsnn {

namespace {

template <typename Derived>
Json matrix_json(const Eigen::MatrixBase<Derived>& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) {
      if constexpr (std::is_floating_point_v<typename Derived::Scalar>) {
        row.push_back(m(i, j));
      } else {
        row.push_back(static_cast<int>(m(i, j)));
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename Scalar>
Matrix<Scalar> matrix_from(const Json& j, const char* what) {
  if (!j.is_array()) throw ValidationError(std::string(what) + " must be an array of rows");
  const auto rows = static_cast<Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Index>(j[0].size()) : 0;
  Matrix<Scalar> m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw ValidationError(std::string(what) + " rows differ in length");
    }
    for (Index c = 0; c < cols; ++c) {
      if constexpr (std::is_floating_point_v<Scalar>) {
        m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
      } else {
        m(r, c) = static_cast<Scalar>(row[static_cast<std::size_t>(c)].get<int>());
      }
    }
  }
  return m;
}

/// Runs a parser, reporting malformed documents as ValidationError.
template <typename F>
auto parse_guard(const char* what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed ") + what + ": " + e.what());
  }
}

Json address_json(const CoreAddress& a) { return {{"chip", a.chip}, {"core", a.core}}; }
CoreAddress address_from(const Json& j) { return {j.at("chip").get<int>(), j.at("core").get<int>()}; }

Json lif_json(const LifParams& l) {
  return {{"tau_mem", l.tau_mem}, {"tau_syn", l.tau_syn}, {"t_ref", l.t_ref}, {"threshold", l.threshold}, {"dt", l.dt}};
}
LifParams lif_from(const Json& j) {
  LifParams l;
  l.tau_mem = j.at("tau_mem").get<double>();
  l.tau_syn = j.at("tau_syn").get<double>();
  l.t_ref = j.at("t_ref").get<double>();
  l.threshold = j.at("threshold").get<double>();
  l.dt = j.at("dt").get<double>();
  return l;
}

Json params_list(const std::vector<SimParams>& ps) {
  Json out = Json::array();
  for (const auto& p : ps) out.push_back(to_json(p));
  return out;
}
std::vector<SimParams> params_list_from(const Json& j) {
  std::vector<SimParams> out;
  for (const auto& p : j) out.push_back(params_from_json(p));
  return out;
}

Json quant_json(const QuantSpec& q) {
  return {{"base_weights", q.base_weights}, {"mask", matrix_json(q.mask)}, {"sign", matrix_json(q.sign)}};
}
QuantSpec quant_from(const Json& j) {
  QuantSpec q;
  q.base_weights = j.at("base_weights").get<BaseWeights>();
  q.mask = matrix_from<std::uint8_t>(j.at("mask"), "mask");
  q.sign = matrix_from<std::int8_t>(j.at("sign"), "sign");
  q.validate();
  return q;
}

std::string source_kind_name(SourceKind k) { return k == SourceKind::virtual_input ? "virtual" : "neuron"; }
SourceKind source_kind_from(const std::string& s) {
  if (s == "virtual") return SourceKind::virtual_input;
  if (s == "neuron") return SourceKind::neuron;
  throw ValidationError("unknown CAM source kind '" + s + "'");
}

Synapse synapse_from(const std::string& s) {
  for (int k = 0; k < kSynapseCount; ++k) {
    if (synapse_name(static_cast<Synapse>(k)) == s) return static_cast<Synapse>(k);
  }
  throw ValidationError("unknown synapse type '" + s + "'");
}

}  // namespace

Json to_json(const SimParams& p) {
  Json currents = Json::object();
  for (Current c : all_currents()) currents[std::string(current_name(c))] = p[c];
  return {{"currents", currents}, {"dt", p.dt}};
}

SimParams params_from_json(const Json& j) {
  return parse_guard("parameter set", [&] {
    SimParams p;
    p.dt = j.at("dt").get<double>();
    const Json& currents = j.at("currents");
    for (const auto& [name, value] : currents.items()) {
      auto c = current_from_name(name);
      if (!c) throw ValidationError("unknown current '" + name + "'");
      p[*c] = value.get<double>();
    }
    for (Current c : all_currents()) {
      if (!currents.contains(std::string(current_name(c)))) {
        throw ValidationError("parameter set lacks " + std::string(current_name(c)));
      }
    }
    p.validate();
    return p;
  });
}

Json to_json(const Network& net) {
  return {{"w_in", matrix_json(net.w_in)}, {"w_rec", matrix_json(net.w_rec)}, {"params", params_list(net.params)}};
}

Network network_from_json(const Json& j) {
  return parse_guard("network", [&] {
    Network net{matrix_from<double>(j.at("w_in"), "w_in"), matrix_from<double>(j.at("w_rec"), "w_rec"),
                params_list_from(j.at("params"))};
    if (net.w_rec.rows() > 0 && net.w_in.rows() == 0) net.w_in.resize(0, net.w_rec.cols());
    net.validate();
    return net;
  });
}

Json to_json(const NetGraph& graph) {
  Json nodes = Json::array();
  for (const auto& node : graph.nodes) {
    if (const auto* lin = std::get_if<LinearWeightsNode>(&node)) {
      nodes.push_back({{"kind", "linear_weights"},
                       {"weights", matrix_json(lin->weights)},
                       {"source_tags", lin->source_tags},
                       {"dest_tags", lin->dest_tags},
                       {"recurrent", lin->recurrent}});
    } else {
      const auto& neu = std::get<DynapseNeuronsNode>(node);
      nodes.push_back({{"kind", "neurons"},
                       {"model", std::string(model_name(neu.model))},
                       {"tags", neu.tags},
                       {"params", params_list(neu.params)},
                       {"lif", lif_json(neu.lif)}});
    }
  }
  Json edges = Json::array();
  for (const auto& e : graph.edges) edges.push_back({e.from, e.to});
  return {{"nodes", nodes}, {"edges", edges}, {"input_tags", graph.input_tags}, {"input_node", graph.input_node}};
}

NetGraph graph_from_json(const Json& j) {
  return parse_guard("graph", [&] {
    NetGraph g;
    for (const auto& n : j.at("nodes")) {
      const auto kind = n.at("kind").get<std::string>();
      if (kind == "linear_weights") {
        LinearWeightsNode lin;
        lin.source_tags = n.at("source_tags").get<std::vector<int>>();
        lin.dest_tags = n.at("dest_tags").get<std::vector<int>>();
        lin.weights = matrix_from<double>(n.at("weights"), "weights");
        if (lin.weights.rows() == 0) lin.weights.resize(0, static_cast<Index>(lin.dest_tags.size()));
        lin.recurrent = n.at("recurrent").get<bool>();
        g.nodes.emplace_back(std::move(lin));
      } else if (kind == "neurons") {
        DynapseNeuronsNode neu;
        neu.model = model_from_name(n.at("model").get<std::string>());
        neu.tags = n.at("tags").get<std::vector<int>>();
        neu.params = params_list_from(n.at("params"));
        neu.lif = lif_from(n.at("lif"));
        g.nodes.emplace_back(std::move(neu));
      } else {
        throw ValidationError("unknown graph node kind '" + kind + "'");
      }
    }
    for (const auto& e : j.at("edges")) g.edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    g.input_tags = j.at("input_tags").get<std::vector<int>>();
    g.input_node = j.at("input_node").get<int>();
    g.validate();
    return g;
  });
}

Json to_json(const HardwareSpec& spec) {
  Json cores = Json::array();
  for (const auto& c : spec.cores) {
    cores.push_back({{"address", address_json(c.address)}, {"params", to_json(c.params)}, {"cluster", c.cluster}});
  }
  Json assignment = Json::array();
  for (const auto& a : spec.core_assignment) assignment.push_back(address_json(a));
  return {{"w_in", matrix_json(spec.w_in)},
          {"w_rec", matrix_json(spec.w_rec)},
          {"virtual_tags", spec.virtual_tags},
          {"hardware_tags", spec.hardware_tags},
          {"core_assignment", assignment},
          {"cluster_of", spec.cluster_of},
          {"cores", cores}};
}

HardwareSpec hardware_spec_from_json(const Json& j) {
  return parse_guard("hardware spec", [&] {
    HardwareSpec s;
    s.w_in = matrix_from<double>(j.at("w_in"), "w_in");
    s.w_rec = matrix_from<double>(j.at("w_rec"), "w_rec");
    if (s.w_in.rows() == 0) s.w_in.resize(0, s.w_rec.cols());
    s.virtual_tags = j.at("virtual_tags").get<std::vector<int>>();
    s.hardware_tags = j.at("hardware_tags").get<std::vector<int>>();
    for (const auto& a : j.at("core_assignment")) s.core_assignment.push_back(address_from(a));
    s.cluster_of = j.at("cluster_of").get<std::vector<int>>();
    for (const auto& c : j.at("cores")) {
      s.cores.push_back({address_from(c.at("address")), params_from_json(c.at("params")), c.at("cluster").get<int>()});
    }
    HardwareLimits unlimited;
    unlimited.synapses_per_neuron = std::numeric_limits<int>::max();
    s.validate(unlimited);
    return s;
  });
}

Json to_json(const HardwareQuantization& q) {
  Json out = Json::array();
  for (const auto& c : q) {
    out.push_back({{"cluster", c.cluster},
                   {"members", c.members},
                   {"w_in", quant_json(c.w_in)},
                   {"w_rec", quant_json(c.w_rec)},
                   {"loss", c.loss}});
  }
  return out;
}

HardwareQuantization quantization_from_json(const Json& j) {
  return parse_guard("quantization", [&] {
    HardwareQuantization q;
    for (const auto& c : j) {
      q.push_back({c.at("cluster").get<int>(), c.at("members").get<std::vector<Index>>(), quant_from(c.at("w_in")),
                   quant_from(c.at("w_rec")), c.at("loss").get<double>()});
    }
    return q;
  });
}

Json to_json(const DeviceConfig& config) {
  std::map<int, Json> chips;
  for (const auto& core : config.cores) {
    Json biases = Json::object();
    for (const auto& [name, code] : core.biases) biases[name] = {{"coarse", code.coarse}, {"fine", code.fine}};
    Json neurons = Json::array();
    for (const auto& n : core.neurons) {
      Json cam = Json::array();
      for (const auto& e : n.cam) {
        cam.push_back({{"source", source_kind_name(e.kind)},
                       {"tag", e.tag},
                       {"type", std::string(synapse_name(e.type))},
                       {"mask", e.mask}});
      }
      Json sram = Json::array();
      for (const auto& d : n.destinations) sram.push_back(address_json(d));
      neurons.push_back({{"tag", n.tag}, {"cam", cam}, {"sram", sram}});
    }
    chips[core.address.chip].push_back({{"core", core.address.core}, {"biases", biases}, {"neurons", neurons}});
  }
  Json chip_list = Json::array();
  for (auto& [chip, cores] : chips) chip_list.push_back({{"chip", chip}, {"cores", cores}});
  Json inputs = Json::array();
  for (const auto& r : config.inputs) inputs.push_back({{"virtual_tag", r.virtual_tag}, {"targets", r.targets}});
  return {{"dt", config.dt},
          {"weight_unit", config.weight_unit},
          {"cam_slots", config.cam_slots},
          {"chips", chip_list},
          {"inputs", inputs}};
}

DeviceConfig device_config_from_json(const Json& j) {
  return parse_guard("device config", [&] {
    DeviceConfig cfg;
    cfg.dt = j.at("dt").get<double>();
    cfg.weight_unit = j.at("weight_unit").get<double>();
    cfg.cam_slots = j.at("cam_slots").get<int>();
    for (const auto& chip : j.at("chips")) {
      const int c = chip.at("chip").get<int>();
      for (const auto& core : chip.at("cores")) {
        CoreConfig cc;
        cc.address = {c, core.at("core").get<int>()};
        for (const auto& [name, code] : core.at("biases").items()) {
          cc.biases[name] = {code.at("coarse").get<int>(), code.at("fine").get<int>()};
        }
        for (const auto& n : core.at("neurons")) {
          NeuronConfig nc;
          nc.tag = n.at("tag").get<int>();
          for (const auto& e : n.at("cam")) {
            const int mask = e.at("mask").get<int>();
            if (mask < 0 || mask >= kMaskCount) throw ValidationError("CAM mask must lie in [0, 15]");
            nc.cam.push_back({source_kind_from(e.at("source").get<std::string>()), e.at("tag").get<int>(),
                              synapse_from(e.at("type").get<std::string>()), static_cast<unsigned>(mask)});
          }
          for (const auto& d : n.at("sram")) nc.destinations.push_back(address_from(d));
          cc.neurons.push_back(std::move(nc));
        }
        cfg.cores.push_back(std::move(cc));
      }
    }
    for (const auto& r : j.at("inputs")) {
      cfg.inputs.push_back({r.at("virtual_tag").get<int>(), r.at("targets").get<std::vector<int>>()});
    }
    cfg.validate();
    return cfg;
  });
}

std::string dump_canonical(const Json& j) { return j.dump(2) + "\n"; }

Json read_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot read " + path.string());
  try {
    return Json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + " is not valid JSON: " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write " + path.string());
  os << dump_canonical(j);
}

}  // namespace mixsnn

#include "mixsnn/hwconfig.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace mixsnn {

namespace {

constexpr double kLogTieTolerance = 1e-12;

std::string core_label(const CoreAddress& a) {
  return "chip " + std::to_string(a.chip) + " core " + std::to_string(a.core);
}

/// Table current of a code, clipped at the leakage floor like every model
/// current.
double decode_current(BiasCode code, const BiasTable& table) {
  return std::max(table.current(code), kCurrentFloor);
}

double translate(double current, const BiasTable& table) {
  return decode_current(current_to_code(current, table), table);
}

BaseWeights translated_bases(const BaseWeights& base, const BiasTable& table) {
  BaseWeights out;
  for (std::size_t k = 0; k < 4; ++k) out[k] = translate(base[k], table);
  return out;
}

const ClusterQuantization& quantization_of(const HardwareQuantization& q, int cluster) {
  for (const auto& c : q) {
    if (c.cluster == cluster) return c;
  }
  throw ValidationError("no quantization for cluster " + std::to_string(cluster));
}

/// Checks that `q` covers the clusters of `spec` with matching shapes.
void check_quantization(const HardwareSpec& spec, const HardwareQuantization& q) {
  if (static_cast<int>(q.size()) != spec.n_clusters()) {
    throw ValidationError("quantization has " + std::to_string(q.size()) + " clusters, the spec " +
                          std::to_string(spec.n_clusters()));
  }
  for (int c = 0; c < spec.n_clusters(); ++c) {
    const auto& cq = quantization_of(q, c);
    if (cq.members != spec.cluster_members(c)) {
      throw ValidationError("cluster " + std::to_string(c) + " members differ from the spec");
    }
    const auto m = static_cast<Index>(cq.members.size());
    if (cq.w_in.rows() != spec.n_inputs() || cq.w_in.cols() != m || cq.w_rec.rows() != spec.n_neurons() ||
        cq.w_rec.cols() != m) {
      throw DimensionError("cluster " + std::to_string(c) + " quantized shapes differ from the spec");
    }
    cq.w_in.validate();
    cq.w_rec.validate();
    if (cq.w_in.base_weights != cq.w_rec.base_weights) {
      throw ValidationError("cluster " + std::to_string(c) + " must share one set of base weights");
    }
  }
}

double shared_value(const HardwareSpec& spec, const char* what, auto get) {
  const double v = get(spec.cores.front().params);
  for (const auto& c : spec.cores) {
    if (get(c.params) != v) throw ValidationError(std::string("all cores must share ") + what);
  }
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// BiasTable

BiasTable::BiasTable(std::vector<Entry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw ValidationError("bias table is empty");
  std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) { return a.code < b.code; });
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const Entry& e = entries_[i];
    if (e.code.coarse < 0 || e.code.fine < 0) throw ValidationError("bias codes must be non-negative");
    if (!std::isfinite(e.current) || e.current <= 0.0) {
      throw ValidationError("bias table currents must be positive and finite");
    }
    if (i > 0 && entries_[i - 1].code == e.code) throw ValidationError("duplicate bias code in table");
    if (i > 0 && entries_[i - 1].code.coarse == e.code.coarse && !(e.current > entries_[i - 1].current)) {
      throw ValidationError("bias table currents must increase with fine code (coarse " +
                            std::to_string(e.code.coarse) + ")");
    }
    sorted_.push_back(e.current);
  }
  std::sort(sorted_.begin(), sorted_.end());
  sorted_.erase(std::unique(sorted_.begin(), sorted_.end()), sorted_.end());
}

BiasTable BiasTable::synthetic(double i0, int n_coarse, int n_fine) {
  if (!(i0 > 0.0) || n_coarse < 1 || n_fine < 1) throw ParameterError("invalid synthetic table shape");
  std::vector<Entry> entries;
  entries.reserve(static_cast<std::size_t>(n_coarse * n_fine));
  for (int c = 0; c < n_coarse; ++c) {
    for (int f = 0; f < n_fine; ++f) {
      entries.push_back({{c, f}, i0 * std::pow(8.0, c) * static_cast<double>(f + 1) / 256.0});
    }
  }
  return BiasTable(std::move(entries));
}

double BiasTable::current(BiasCode code) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), code,
                             [](const Entry& e, const BiasCode& c) { return e.code < c; });
  if (it == entries_.end() || it->code != code) {
    throw ValidationError("bias code (" + std::to_string(code.coarse) + ", " + std::to_string(code.fine) +
                          ") is not in the table");
  }
  return it->current;
}

double BiasTable::log_step_at(double current) const {
  if (sorted_.size() < 2) return 0.0;
  auto hi = std::upper_bound(sorted_.begin(), sorted_.end(), current);
  if (hi == sorted_.begin()) ++hi;
  if (hi == sorted_.end()) --hi;
  return std::log(*hi / *(hi - 1));
}

BiasCode current_to_code(double current, const BiasTable& table) {
  if (!std::isfinite(current) || current <= 0.0 || current < table.min_current() * (1.0 - kLogTieTolerance)) {
    std::ostringstream os;
    os << "current " << current << " A is below the table range; nearest achievable " << table.min_current()
       << " A";
    throw RangeError(os.str(), table.min_current());
  }
  if (current > table.max_current() * (1.0 + kLogTieTolerance)) {
    std::ostringstream os;
    os << "current " << current << " A is above the table range; nearest achievable " << table.max_current()
       << " A";
    throw RangeError(os.str(), table.max_current());
  }
  const double target = std::log(current);
  BiasCode best{};
  double best_dist = std::numeric_limits<double>::infinity();
  for (const auto& e : table.entries()) {
    const double d = std::abs(std::log(e.current) - target);
    if (d < best_dist - kLogTieTolerance) {
      best_dist = d;
      best = e.code;
    }
  }
  return best;
}

void write_bias_table(std::ostream& os, const BiasTable& table) {
  os << "coarse,fine,current_ampere\n";
  os.precision(17);
  for (const auto& e : table.entries()) os << e.code.coarse << ',' << e.code.fine << ',' << e.current << '\n';
}

BiasTable read_bias_table(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("coarse,fine,current", 0) != 0) {
    throw ValidationError("bias table CSV needs the header coarse,fine,current_ampere");
  }
  std::vector<BiasTable::Entry> entries;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    BiasTable::Entry e;
    char c1 = 0, c2 = 0;
    if (!(ls >> e.code.coarse >> c1 >> e.code.fine >> c2 >> e.current) || c1 != ',' || c2 != ',') {
      throw ValidationError("malformed bias table line " + std::to_string(lineno));
    }
    entries.push_back(e);
  }
  return BiasTable(std::move(entries));
}

void save_bias_table(const std::filesystem::path& path, const BiasTable& table) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write " + path.string());
  write_bias_table(os, table);
}

BiasTable load_bias_table(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot read " + path.string());
  return read_bias_table(is);
}

// ---------------------------------------------------------------------------
// Quantization and translation

HardwareQuantization quantize_hardware(const HardwareSpec& spec, const AutoencoderConfig& cfg) {
  HardwareQuantization out;
  for (int c = 0; c < spec.n_clusters(); ++c) {
    ClusterQuantization cq;
    cq.cluster = c;
    cq.members = spec.cluster_members(c);
    const auto m = static_cast<Index>(cq.members.size());
    MatrixXd w_in(spec.n_inputs(), m), w_rec(spec.n_neurons(), m);
    for (Index k = 0; k < m; ++k) {
      w_in.col(k) = spec.w_in.col(cq.members[static_cast<std::size_t>(k)]);
      w_rec.col(k) = spec.w_rec.col(cq.members[static_cast<std::size_t>(k)]);
    }
    auto specs = autoencoder_quantize_shared({w_in, w_rec}, cfg, &cq.loss);
    const double unit = spec.params_of(cq.members.front())[Current::Iw_ref];
    for (auto& s : specs) {
      for (double& b : s.base_weights) b *= unit;
    }
    cq.w_in = std::move(specs[0]);
    cq.w_rec = std::move(specs[1]);
    out.push_back(std::move(cq));
  }
  return out;
}

SimParams translate_params(const SimParams& p, const BiasTable& table) {
  SimParams out = p;
  for (Current c : hardware_currents()) {
    try {
      out[c] = translate(p[c], table);
    } catch (const RangeError& e) {
      throw RangeError(std::string(current_name(c)) + ": " + e.what(), e.nearest_achievable);
    }
  }
  return out;
}

Network quantized_network(const HardwareSpec& spec, const HardwareQuantization& q, const BiasTable& table) {
  check_quantization(spec, q);
  Network net;
  net.w_in = MatrixXd::Zero(spec.n_inputs(), spec.n_neurons());
  net.w_rec = MatrixXd::Zero(spec.n_neurons(), spec.n_neurons());
  net.params.resize(static_cast<std::size_t>(spec.n_neurons()));
  for (const auto& cq : q) {
    const BaseWeights base = translated_bases(cq.w_in.base_weights, table);
    for (std::size_t k = 0; k < cq.members.size(); ++k) {
      const Index j = cq.members[k];
      SimParams p = translate_params(spec.params_of(j), table);
      for (int b = 0; b < 4; ++b) p[base_weight_current(b)] = base[static_cast<std::size_t>(b)];
      const double unit = p[Current::Iw_ref];
      const auto col = static_cast<Index>(k);
      for (Index i = 0; i < spec.n_inputs(); ++i) {
        net.w_in(i, j) = decode_weight(base, cq.w_in.mask(i, col), cq.w_in.sign(i, col), unit);
      }
      for (Index i = 0; i < spec.n_neurons(); ++i) {
        net.w_rec(i, j) = decode_weight(base, cq.w_rec.mask(i, col), cq.w_rec.sign(i, col), unit);
      }
      net.params[static_cast<std::size_t>(j)] = p;
    }
  }
  net.validate();
  return net;
}

// ---------------------------------------------------------------------------
// DeviceConfig

Index DeviceConfig::n_neurons() const {
  Index n = 0;
  for (const auto& c : cores) n += static_cast<Index>(c.neurons.size());
  return n;
}

void DeviceConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("config dt must be positive");
  if (!(weight_unit > 0.0) || !std::isfinite(weight_unit)) {
    throw ValidationError("config weight_unit must be positive");
  }
  if (cam_slots < 1) throw ValidationError("config cam_slots must be positive");
  const Index n = n_neurons();
  if (n == 0) throw ValidationError("config has no neurons");

  std::set<CoreAddress> addresses;
  std::vector<const NeuronConfig*> by_tag(static_cast<std::size_t>(n), nullptr);
  std::vector<CoreAddress> core_of(static_cast<std::size_t>(n));
  for (const auto& core : cores) {
    if (!addresses.insert(core.address).second) {
      throw ValidationError("duplicate " + core_label(core.address));
    }
    for (Current c : hardware_currents()) {
      if (!core.biases.contains(std::string(current_name(c)))) {
        throw ValidationError(core_label(core.address) + " lacks the bias " + std::string(current_name(c)));
      }
    }
    for (const auto& [name, code] : core.biases) {
      auto c = current_from_name(name);
      if (!c || *c == Current::Iw_ref) throw ValidationError("unknown bias " + name);
      if (code.coarse < 0 || code.fine < 0) throw ValidationError("negative bias code for " + name);
    }
    for (const auto& nc : core.neurons) {
      if (nc.tag < 0 || nc.tag >= n || by_tag[static_cast<std::size_t>(nc.tag)]) {
        throw ValidationError("hardware tags must be 0.." + std::to_string(n - 1) + " with no repeats (tag " +
                              std::to_string(nc.tag) + ")");
      }
      by_tag[static_cast<std::size_t>(nc.tag)] = &nc;
      core_of[static_cast<std::size_t>(nc.tag)] = core.address;
    }
  }

  const auto n_virtual = static_cast<int>(inputs.size());
  for (int v = 0; v < n_virtual; ++v) {
    if (inputs[static_cast<std::size_t>(v)].virtual_tag != v) {
      throw ValidationError("input routes must list virtual tags 0.." + std::to_string(n_virtual - 1) + " in order");
    }
  }
  for (Index j = 0; j < n; ++j) {
    const NeuronConfig& nc = *by_tag[static_cast<std::size_t>(j)];
    const std::string who = "hardware tag " + std::to_string(j);
    if (static_cast<int>(nc.cam.size()) > cam_slots) {
      throw ValidationError(who + " uses " + std::to_string(nc.cam.size()) + " CAM entries for " +
                            std::to_string(cam_slots) + " slots");
    }
    std::set<std::pair<SourceKind, int>> seen;
    for (const auto& e : nc.cam) {
      if (e.mask >= static_cast<unsigned>(kMaskCount)) throw ValidationError(who + " has a mask above 15");
      if (e.type != Synapse::ampa && e.type != Synapse::gaba) {
        throw ValidationError(who + " uses synapse type " + std::string(synapse_name(e.type)) +
                              "; only AMPA and GABA are decoded");
      }
      if (!seen.insert({e.kind, e.tag}).second) throw ValidationError(who + " listens twice to one source");
      if (e.kind == SourceKind::virtual_input) {
        if (e.tag < 0 || e.tag >= n_virtual) {
          throw ValidationError(who + " listens to unknown virtual tag " + std::to_string(e.tag));
        }
        const auto& t = inputs[static_cast<std::size_t>(e.tag)].targets;
        if (std::find(t.begin(), t.end(), static_cast<int>(j)) == t.end()) {
          throw ValidationError("virtual tag " + std::to_string(e.tag) + " is not routed to " + who);
        }
      } else {
        if (e.tag < 0 || e.tag >= n) {
          throw ValidationError(who + " listens to unknown hardware tag " + std::to_string(e.tag));
        }
        const auto& d = by_tag[static_cast<std::size_t>(e.tag)]->destinations;
        if (std::find(d.begin(), d.end(), core_of[static_cast<std::size_t>(j)]) == d.end()) {
          throw ValidationError("hardware tag " + std::to_string(e.tag) + " does not send to the core of " + who);
        }
      }
    }
    for (const auto& d : nc.destinations) {
      if (!addresses.contains(d)) throw ValidationError(who + " sends to unconfigured " + core_label(d));
    }
  }
  for (const auto& route : inputs) {
    for (int t : route.targets) {
      if (t < 0 || t >= n) {
        throw ValidationError("virtual tag " + std::to_string(route.virtual_tag) + " routes to unknown hardware tag " +
                              std::to_string(t));
      }
    }
  }
}

DeviceConfig config_from_specification(const HardwareSpec& spec, const HardwareQuantization& q,
                                       const BiasTable& table, const HardwareLimits& limits) {
  limits.validate();
  if (spec.n_neurons() == 0 || spec.cores.empty()) throw ValidationError("hardware spec has no neurons");
  check_quantization(spec, q);

  DeviceConfig cfg;
  cfg.dt = shared_value(spec, "one time step", [](const SimParams& p) { return p.dt; });
  cfg.weight_unit = shared_value(spec, "one weight unit (Iw_ref)", [](const SimParams& p) { return p[Current::Iw_ref]; });
  cfg.cam_slots = limits.synapses_per_neuron;

  const Index n = spec.n_neurons();
  std::vector<std::vector<CamEntry>> cam(static_cast<std::size_t>(n));
  for (const auto& cq : q) {
    for (std::size_t k = 0; k < cq.members.size(); ++k) {
      const Index j = cq.members[k];
      const auto col = static_cast<Index>(k);
      auto& slots = cam[static_cast<std::size_t>(j)];
      auto add = [&](SourceKind kind, const QuantSpec& qs, Index rows) {
        for (Index i = 0; i < rows; ++i) {
          if (qs.sign(i, col) == 0 || qs.mask(i, col) == 0) continue;
          slots.push_back({kind, static_cast<int>(i), qs.sign(i, col) > 0 ? Synapse::ampa : Synapse::gaba,
                           qs.mask(i, col)});
        }
      };
      add(SourceKind::virtual_input, cq.w_in, spec.n_inputs());
      add(SourceKind::neuron, cq.w_rec, spec.n_neurons());
      if (static_cast<int>(slots.size()) > limits.synapses_per_neuron) {
        throw MappingError("CAM overflow at hardware tag " + std::to_string(j) + ": " + std::to_string(slots.size()) +
                           " afferents for " + std::to_string(limits.synapses_per_neuron) + " slots");
      }
    }
  }

  for (Index i = 0; i < spec.n_inputs(); ++i) cfg.inputs.push_back({static_cast<int>(i), {}});
  std::vector<std::set<CoreAddress>> destinations(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) {
    for (const auto& e : cam[static_cast<std::size_t>(j)]) {
      if (e.kind == SourceKind::virtual_input) {
        cfg.inputs[static_cast<std::size_t>(e.tag)].targets.push_back(static_cast<int>(j));
      } else {
        destinations[static_cast<std::size_t>(e.tag)].insert(spec.core_assignment[static_cast<std::size_t>(j)]);
      }
    }
  }

  for (const auto& core : spec.cores) {
    CoreConfig cc;
    cc.address = core.address;
    const auto& cq = quantization_of(q, core.cluster);
    for (Current c : hardware_currents()) {
      double value = core.params[c];
      for (int b = 0; b < 4; ++b) {
        if (c == base_weight_current(b)) value = cq.w_in.base_weights[static_cast<std::size_t>(b)];
      }
      try {
        cc.biases[std::string(current_name(c))] = current_to_code(value, table);
      } catch (const RangeError& e) {
        throw RangeError(core_label(core.address) + " " + std::string(current_name(c)) + ": " + e.what(),
                         e.nearest_achievable);
      }
    }
    for (Index j = 0; j < n; ++j) {
      if (spec.core_assignment[static_cast<std::size_t>(j)] != core.address) continue;
      const auto& d = destinations[static_cast<std::size_t>(j)];
      cc.neurons.push_back({static_cast<int>(j), cam[static_cast<std::size_t>(j)], {d.begin(), d.end()}});
    }
    cfg.cores.push_back(std::move(cc));
  }
  cfg.validate();
  return cfg;
}

Network net_from_config(const DeviceConfig& config, const BiasTable& table) {
  config.validate();
  const Index n = config.n_neurons();
  const auto n_inputs = static_cast<Index>(config.inputs.size());
  Network net;
  net.w_in = MatrixXd::Zero(n_inputs, n);
  net.w_rec = MatrixXd::Zero(n, n);
  net.params.resize(static_cast<std::size_t>(n));
  for (const auto& core : config.cores) {
    SimParams p;
    p.dt = config.dt;
    for (Current c : hardware_currents()) {
      p[c] = decode_current(core.biases.at(std::string(current_name(c))), table);
    }
    p[Current::Iw_ref] = config.weight_unit;
    p.validate();
    BaseWeights base;
    for (int b = 0; b < 4; ++b) base[static_cast<std::size_t>(b)] = p[base_weight_current(b)];
    for (const auto& nc : core.neurons) {
      for (const auto& e : nc.cam) {
        const double w = decode_weight(base, e.mask, e.type == Synapse::ampa ? 1 : -1, config.weight_unit);
        (e.kind == SourceKind::virtual_input ? net.w_in : net.w_rec)(e.tag, nc.tag) = w;
      }
      net.params[static_cast<std::size_t>(nc.tag)] = p;
    }
  }
  net.validate();
  return net;
}

}  // namespace mixsnn

#pragma once

#include "mixsnn/mapper.hpp"
#include "mixsnn/quantizer.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace mixsnn {

struct BiasCode {
  int coarse = 0;
  int fine = 0;
  auto operator<=>(const BiasCode&) const = default;
};

/// Lookup table from bias generator codes to currents.
class BiasTable {
 public:
  struct Entry {
    BiasCode code;
    double current = 0.0;
  };

  BiasTable() = default;
  /// Entries are sorted by (coarse, fine); throws ValidationError unless
  /// currents are positive and strictly increasing in fine for every coarse.
  explicit BiasTable(std::vector<Entry> entries);

  /// I0 * 8^coarse * (fine + 1) / 256. Not calibrated against any chip.
  static BiasTable synthetic(double i0 = 2.5e-13, int n_coarse = 6, int n_fine = 256);

  const std::vector<Entry>& entries() const { return entries_; }
  double current(BiasCode code) const;
  double min_current() const { return sorted_.front(); }
  double max_current() const { return sorted_.back(); }
  /// log(upper / lower) of the two table currents bracketing `current`.
  double log_step_at(double current) const;

 private:
  std::vector<Entry> entries_;
  std::vector<double> sorted_;  // distinct currents, ascending
};

/// Code whose current is nearest in the log domain; ties go to the lower
/// coarse, then the lower fine. Throws RangeError outside the table.
BiasCode current_to_code(double current, const BiasTable& table);

/// CSV `coarse,fine,current_ampere` with a header line.
void write_bias_table(std::ostream& os, const BiasTable& table);
BiasTable read_bias_table(std::istream& is);
void save_bias_table(const std::filesystem::path& path, const BiasTable& table);
BiasTable load_bias_table(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Quantized hardware weights

/// Weights of one cluster. Both specs share `base_weights`, in amperes;
/// `w_in` covers every virtual tag and `w_rec` every hardware tag as rows,
/// the cluster members as columns.
struct ClusterQuantization {
  int cluster = 0;
  std::vector<Index> members;
  QuantSpec w_in;
  QuantSpec w_rec;
  /// Reconstruction loss in weight units.
  double loss = 0.0;
};

using HardwareQuantization = std::vector<ClusterQuantization>;

/// Quantizes every cluster of the mapped network with one shared set of
/// base weights, scaled to amperes by the cluster's Iw_ref.
HardwareQuantization quantize_hardware(const HardwareSpec& spec, const AutoencoderConfig& cfg = {});

/// Signed weight, in units of `weight_unit`, of a connection with the given
/// mask and sign over base weight currents. Shared by every decode path.
inline double decode_weight(const BaseWeights& base_currents, unsigned mask, int sign, double weight_unit) {
  return static_cast<double>(sign) * subset_sum(base_currents, mask) / weight_unit;
}

/// Every chip current of `p` replaced by the table current of its code.
SimParams translate_params(const SimParams& p, const BiasTable& table);

/// The network the chip realises: translated parameters, base weights from
/// the quantization translated through the table, decoded weights.
Network quantized_network(const HardwareSpec& spec, const HardwareQuantization& q,
                          const BiasTable& table);

// ---------------------------------------------------------------------------
// Device configuration

enum class SourceKind { virtual_input, neuron };

/// One listening slot of a neuron.
struct CamEntry {
  SourceKind kind = SourceKind::virtual_input;
  int tag = 0;
  Synapse type = Synapse::ampa;
  unsigned mask = 0;
  bool operator==(const CamEntry&) const = default;
};

struct NeuronConfig {
  int tag = 0;
  std::vector<CamEntry> cam;
  /// Cores listening to this neuron's spikes.
  std::vector<CoreAddress> destinations;
  bool operator==(const NeuronConfig&) const = default;
};

struct CoreConfig {
  CoreAddress address;
  std::map<std::string, BiasCode> biases;
  std::vector<NeuronConfig> neurons;
  bool operator==(const CoreConfig&) const = default;
};

struct InputRoute {
  int virtual_tag = 0;
  std::vector<int> targets;  // hardware tags
  bool operator==(const InputRoute&) const = default;
};

struct DeviceConfig {
  double dt = 1e-3;
  /// Iw_ref: current of one simulated weight unit. Not a bias generator.
  double weight_unit = 0.0;
  int cam_slots = 64;
  std::vector<CoreConfig> cores;
  std::vector<InputRoute> inputs;

  Index n_neurons() const;
  /// Throws ValidationError on dangling tags, duplicate slots or bad codes.
  void validate() const;
  bool operator==(const DeviceConfig&) const = default;
};

/// Builds the CAM/SRAM contents and bias codes of a mapped, quantized
/// network. Throws MappingError naming the neuron on CAM overflow and
/// RangeError when a current falls outside the table.
DeviceConfig config_from_specification(const HardwareSpec& spec, const HardwareQuantization& q,
                                       const BiasTable& table,
                                       const HardwareLimits& limits = {});

/// Decodes a configuration into a runnable network over the hardware tags.
Network net_from_config(const DeviceConfig& config, const BiasTable& table);

}  // namespace mixsnn

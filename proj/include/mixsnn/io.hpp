#pragma once

#include "mixsnn/hwconfig.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>

namespace mixsnn {

using Json = nlohmann::json;

/// Currents keyed by name, plus dt.
Json to_json(const SimParams& p);
SimParams params_from_json(const Json& j);

/// Weights as arrays of rows and one parameter set per neuron.
Json to_json(const Network& net);
Network network_from_json(const Json& j);

Json to_json(const NetGraph& graph);
/// Throws ValidationError on an unknown node kind or a malformed node.
NetGraph graph_from_json(const Json& j);

Json to_json(const HardwareSpec& spec);
HardwareSpec hardware_spec_from_json(const Json& j);

/// Masks as integers 0-15, base weights in amperes.
Json to_json(const HardwareQuantization& q);
HardwareQuantization quantization_from_json(const Json& j);

Json to_json(const DeviceConfig& config);
DeviceConfig device_config_from_json(const Json& j);

/// Sorted keys, two-space indent, shortest round-trip numbers, final
/// newline. Parsing and re-serializing the output reproduces it exactly.
std::string dump_canonical(const Json& j);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

}  // namespace mixsnn

#pragma once

#include "mixsnn/hwconfig.hpp"
#include "mixsnn/mismatch.hpp"

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace mixsnn {

/// Address-event: microsecond timestamp and source tag.
struct AerEvent {
  std::int64_t timestamp_us = 0;
  int address = 0;
  auto operator<=>(const AerEvent&) const = default;
};

using AerStream = std::vector<AerEvent>;

/// One event per spike at step * dt, address = channel; sorted.
AerStream raster_to_aer(const SpikeRaster& raster);

/// Bins events into floor(t / dt); several events in one cell saturate to
/// one spike. Throws ValidationError on unsorted input, bad addresses or
/// events past the last step.
SpikeRaster aer_to_raster(const AerStream& events, double dt, Index n_steps, Index n_channels);

/// CSV `timestamp_us,address` with a header line.
void write_aer(std::ostream& os, const AerStream& events);
AerStream read_aer(std::istream& is);
void save_aer(const std::filesystem::path& path, const AerStream& events);
AerStream load_aer(const std::filesystem::path& path);

/// Software stand-in for a configured chip. Fabrication mismatch is drawn
/// once at construction and frozen for the lifetime of the device.
class VirtualDevice {
 public:
  VirtualDevice(const DeviceConfig& config, const BiasTable& table, const MismatchSpec& mismatch,
                const EvolveOptions& options = {});

  /// Decoded parameters with the device's mismatch applied.
  const Network& network() const { return net_; }
  double dt() const { return net_.dt(); }

  /// Runs `duration_s` seconds of input and returns the output events,
  /// addressed by hardware tag.
  AerStream run(const AerStream& input, double duration_s) const;
  SpikeRaster run(const SpikeRaster& input) const;

 private:
  Network net_;
  EvolveOptions options_;
};

inline AerStream run_device(const DeviceConfig& config, const BiasTable& table, const AerStream& input,
                            const MismatchSpec& mismatch, double duration_s) {
  return VirtualDevice(config, table, mismatch).run(input, duration_s);
}

}  // namespace mixsnn

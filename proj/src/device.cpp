#include "mixsnn/device.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace mixsnn {

namespace {

double step_us(double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ParameterError("dt must be positive");
  return dt * 1e6;
}

}  // namespace

AerStream raster_to_aer(const SpikeRaster& raster) {
  const double us = step_us(raster.dt());
  AerStream out;
  out.reserve(static_cast<std::size_t>(raster.total_spikes()));
  for (Index t = 0; t < raster.n_steps(); ++t) {
    const auto stamp = static_cast<std::int64_t>(std::llround(static_cast<double>(t) * us));
    for (Index c = 0; c < raster.n_channels(); ++c) {
      if (raster(t, c)) out.push_back({stamp, static_cast<int>(c)});
    }
  }
  return out;
}

SpikeRaster aer_to_raster(const AerStream& events, double dt, Index n_steps, Index n_channels) {
  const double us = step_us(dt);
  if (n_steps < 0 || n_channels < 0) throw ParameterError("raster shape must be non-negative");
  SpikeRaster raster(n_steps, n_channels, dt);
  for (std::size_t i = 0; i < events.size(); ++i) {
    const AerEvent& e = events[i];
    if (i > 0 && e < events[i - 1]) {
      throw ValidationError("AER stream is not sorted at event " + std::to_string(i));
    }
    if (e.timestamp_us < 0) throw ValidationError("negative timestamp at event " + std::to_string(i));
    if (e.address < 0 || e.address >= n_channels) {
      throw ValidationError("address " + std::to_string(e.address) + " at event " + std::to_string(i) +
                            " is outside 0.." + std::to_string(n_channels - 1));
    }
    // The small offset keeps exact multiples of dt on their own step.
    const auto step = static_cast<Index>(std::floor(static_cast<double>(e.timestamp_us) / us + 1e-9));
    if (step >= n_steps) {
      throw ValidationError("event " + std::to_string(i) + " at " + std::to_string(e.timestamp_us) +
                            " us lies beyond the " + std::to_string(n_steps) + "-step window");
    }
    raster.set(step, e.address, true);
  }
  return raster;
}

void write_aer(std::ostream& os, const AerStream& events) {
  os << "timestamp_us,address\n";
  for (const auto& e : events) os << e.timestamp_us << ',' << e.address << '\n';
}

AerStream read_aer(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "timestamp_us,address") {
    throw ValidationError("AER CSV needs the header timestamp_us,address");
  }
  AerStream out;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    AerEvent e;
    char comma = 0;
    if (!(ls >> e.timestamp_us >> comma >> e.address) || comma != ',' || !(ls >> std::ws).eof()) {
      throw ValidationError("malformed AER line " + std::to_string(lineno));
    }
    out.push_back(e);
  }
  return out;
}

void save_aer(const std::filesystem::path& path, const AerStream& events) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write " + path.string());
  write_aer(os, events);
}

AerStream load_aer(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot read " + path.string());
  return read_aer(is);
}

VirtualDevice::VirtualDevice(const DeviceConfig& config, const BiasTable& table, const MismatchSpec& mismatch,
                             const EvolveOptions& options)
    : net_(net_from_config(config, table)), options_(options) {
  mismatch.validate();
  if (mismatch.sigma_rel > 0.0) net_ = sample_mismatch(net_, mismatch, 0);
}

SpikeRaster VirtualDevice::run(const SpikeRaster& input) const {
  return evolve(net_, input, options_).output;
}

AerStream VirtualDevice::run(const AerStream& input, double duration_s) const {
  if (!(duration_s >= 0.0) || !std::isfinite(duration_s)) throw ParameterError("duration must be non-negative");
  const auto n_steps = static_cast<Index>(std::llround(duration_s / dt()));
  return raster_to_aer(run(aer_to_raster(input, dt(), n_steps, net_.n_inputs())));
}

}  // namespace mixsnn

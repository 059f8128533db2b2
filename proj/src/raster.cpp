#include "mixsnn/raster.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace mixsnn {

SpikeRaster::SpikeRaster(Index n_steps, Index n_channels, double dt)
    : data_(SpikeMatrix::Zero(n_steps, n_channels)), dt_(dt) {
  if (n_steps < 0 || n_channels < 0) throw DimensionError("raster dimensions must be >= 0");
  if (!(dt > 0.0)) throw ParameterError("raster dt must be positive");
}

SpikeRaster::SpikeRaster(SpikeMatrix data, double dt) : data_(std::move(data)), dt_(dt) {
  if (!(dt > 0.0)) throw ParameterError("raster dt must be positive");
  if ((data_.array() > 1).any()) throw ValidationError("raster entries must be 0 or 1");
}

Eigen::VectorXi SpikeRaster::counts() const {
  return data_.cast<int>().colwise().sum().transpose();
}

Index SpikeRaster::total_spikes() const { return data_.cast<Index>().sum(); }

void write_raster(std::ostream& os, const SpikeRaster& raster) {
  char header[128];
  std::snprintf(header, sizeof header, "# dt_ms=%.17g n_steps=%lld n_channels=%lld\n",
                raster.dt() * 1e3, static_cast<long long>(raster.n_steps()),
                static_cast<long long>(raster.n_channels()));
  os << header;
  for (Index t = 0; t < raster.n_steps(); ++t) {
    for (Index c = 0; c < raster.n_channels(); ++c) {
      if (raster(t, c)) os << t << ',' << c << '\n';
    }
  }
}

SpikeRaster read_raster(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("raster file is empty");
  double dt_ms = 0.0;
  long long n_steps = -1, n_channels = -1;
  if (std::sscanf(line.c_str(), "# dt_ms=%lf n_steps=%lld n_channels=%lld", &dt_ms, &n_steps,
                  &n_channels) != 3) {
    throw ValidationError("malformed raster header: " + line);
  }
  SpikeRaster raster(n_steps, n_channels, dt_ms * 1e-3);
  long long prev_step = -1, prev_channel = -1;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    long long step = 0, channel = 0;
    char trailing = 0;
    if (std::sscanf(line.c_str(), "%lld,%lld%c", &step, &channel, &trailing) != 2) {
      throw ValidationError("malformed raster line " + std::to_string(line_no));
    }
    if (step < 0 || step >= n_steps || channel < 0 || channel >= n_channels) {
      throw ValidationError("raster event out of range at line " + std::to_string(line_no));
    }
    if (step < prev_step || (step == prev_step && channel <= prev_channel)) {
      throw ValidationError("raster events not sorted at line " + std::to_string(line_no));
    }
    prev_step = step;
    prev_channel = channel;
    raster.set(step, channel, true);
  }
  return raster;
}

void save_raster(const std::filesystem::path& path, const SpikeRaster& raster) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  write_raster(os, raster);
}

SpikeRaster load_raster(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path.string());
  return read_raster(is);
}

}  // namespace mixsnn

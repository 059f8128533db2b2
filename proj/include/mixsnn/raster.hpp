#pragma once

#include "mixsnn/common.hpp"

#include <filesystem>
#include <iosfwd>

namespace mixsnn {

/// Dense time x channel binary spike tensor.
class SpikeRaster {
 public:
  SpikeRaster() = default;
  SpikeRaster(Index n_steps, Index n_channels, double dt);
  SpikeRaster(SpikeMatrix data, double dt);

  Index n_steps() const { return data_.rows(); }
  Index n_channels() const { return data_.cols(); }
  double dt() const { return dt_; }

  const SpikeMatrix& data() const { return data_; }
  std::uint8_t operator()(Index step, Index channel) const { return data_(step, channel); }
  void set(Index step, Index channel, bool spike) { data_(step, channel) = spike ? 1 : 0; }

  /// Number of spikes per channel.
  Eigen::VectorXi counts() const;
  Index total_spikes() const;
  MatrixXd as_double() const { return data_.cast<double>(); }

  bool operator==(const SpikeRaster& other) const {
    return dt_ == other.dt_ && data_.rows() == other.data_.rows() &&
           data_.cols() == other.data_.cols() && data_ == other.data_;
  }

 private:
  SpikeMatrix data_;
  double dt_ = 1e-3;
};

/// Text format: a `# dt_ms=<f> n_steps=<d> n_channels=<d>` header, then one
/// `step,channel` line per spike sorted by step then channel.
void write_raster(std::ostream& os, const SpikeRaster& raster);
SpikeRaster read_raster(std::istream& is);
void save_raster(const std::filesystem::path& path, const SpikeRaster& raster);
SpikeRaster load_raster(const std::filesystem::path& path);

}  // namespace mixsnn

#pragma once

#include "mixsnn/common.hpp"
#include "mixsnn/optim.hpp"

#include <array>
#include <vector>

namespace mixsnn {

using MaskMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;
using SignMatrix = Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic>;
using BaseWeights = std::array<double, 4>;

inline constexpr int kMaskCount = 16;

/// Hardware weight representation: W_Q = sign * sum of the base weights
/// selected by the 4-bit mask.
struct QuantSpec {
  BaseWeights base_weights{};
  MaskMatrix mask;
  SignMatrix sign;

  Index rows() const { return mask.rows(); }
  Index cols() const { return mask.cols(); }
  /// Throws ValidationError.
  void validate() const;
};

/// Sum of the base weights selected by `mask`, accumulated in bit order.
template <typename Scalar>
Scalar subset_sum(const std::array<Scalar, 4>& base, unsigned mask) {
  Scalar s = 0;
  for (int k = 0; k < 4; ++k) {
    if (mask & (1u << k)) s += base[static_cast<std::size_t>(k)];
  }
  return s;
}

MatrixXd reconstruct(const QuantSpec& q);

/// Mean squared error between |W_Q| and |W|.
double reconstruction_loss(const QuantSpec& q, const MatrixXd& w);

/// Per-entry best of the 16 masks; ties go to the smaller mask.
MaskMatrix refine_masks(const BaseWeights& base, const MatrixXd& w);

/// Entrywise sign of a matrix in {-1, 0, +1}.
SignMatrix sign_of(const MatrixXd& w);

struct AutoencoderConfig {
  int steps = 100;
  double learning_rate = 1e-2;
  /// Independent runs; the lowest loss wins.
  int restarts = 1024;
  std::uint64_t seed = 0;
  void validate() const;
};

struct QuantResult {
  QuantSpec spec;
  double loss = 0.0;
};

/// Learns the 4 base weights of |W| with a linear encoder (softplus codes)
/// and a relaxed sigmoid mask decoder, then assigns masks exactly and
/// descends over assignment moves with least-squares bases. Runs on W
/// normalised by its largest magnitude so the result is scale equivariant.
QuantResult autoencoder_quantize(const MatrixXd& w, const AutoencoderConfig& cfg = {});

/// Quantizes several matrices that must share one set of base weights
/// (w_in and w_rec columns of one core cluster).
std::vector<QuantSpec> autoencoder_quantize_shared(const std::vector<MatrixXd>& ws,
                                                   const AutoencoderConfig& cfg = {},
                                                   double* loss = nullptr);

}  // namespace mixsnn

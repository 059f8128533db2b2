#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mixsnn {

using Eigen::ArrayXd;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::VectorXd;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Row-major binary spike matrix, time along rows.
using SpikeMatrix =
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shapes of operands disagree.
struct DimensionError : Error {
  using Error::Error;
};
/// Input violates a documented invariant.
struct ValidationError : Error {
  using Error::Error;
};
/// A state variable or parameter went non-finite.
struct NumericalError : Error {
  using Error::Error;
};
/// A caller-supplied parameter is out of its legal domain.
struct ParameterError : Error {
  using Error::Error;
};
/// Hardware resource limits were exceeded while mapping or configuring.
struct MappingError : Error {
  using Error::Error;
};
/// A current cannot be expressed by the bias table.
struct RangeError : Error {
  double nearest_achievable;
  RangeError(const std::string& what, double nearest)
      : Error(what), nearest_achievable(nearest) {}
};

}  // namespace mixsnn

#pragma once

#include "mixsnn/common.hpp"

#include <cmath>

namespace mixsnn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    if (!(learning_rate >= 0.0)) throw ParameterError("learning rate must be >= 0");
    if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) {
      throw ParameterError("Adam betas must lie in (0, 1)");
    }
    if (!(eps > 0.0)) throw ParameterError("Adam eps must be positive");
  }
};

/// Adam moment estimates for one dense parameter block.
template <typename Scalar = double>
class AdamMoments {
 public:
  AdamMoments() = default;
  AdamMoments(Index rows, Index cols)
      : m_(Matrix<Scalar>::Zero(rows, cols)), v_(Matrix<Scalar>::Zero(rows, cols)) {}

  /// Applies one descent step in place. `step` counts from 1.
  template <typename Param, typename Grad>
  void update(Eigen::MatrixBase<Param>& param, const Eigen::MatrixBase<Grad>& grad,
              const AdamConfig& cfg, long step) {
    if (m_.rows() != grad.rows() || m_.cols() != grad.cols()) {
      m_ = Matrix<Scalar>::Zero(grad.rows(), grad.cols());
      v_ = Matrix<Scalar>::Zero(grad.rows(), grad.cols());
    }
    m_ = cfg.beta1 * m_ + (1.0 - cfg.beta1) * grad;
    v_ = cfg.beta2 * v_ + (1.0 - cfg.beta2) * grad.cwiseAbs2();
    const Scalar c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const Scalar c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    param.derived().array() -=
        cfg.learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg.eps);
  }

 private:
  Matrix<Scalar> m_, v_;
};

}  // namespace mixsnn

#pragma once

#include "mixsnn/neuron.hpp"

#include <cstdint>
#include <set>
#include <string>

namespace mixsnn {

/// Relative Gaussian perturbation of fabricated parameters.
struct MismatchSpec {
  double sigma_rel = 0.2;
  int refresh_period = 100;
  std::uint64_t seed = 0;
  /// Current names (see current_name) plus "w_in" / "w_rec".
  std::set<std::string> targets = default_targets();

  /// Every fabricated quantity: all chip currents but Ireset, plus weights.
  static std::set<std::string> default_targets();
  /// The trainable weights only.
  static std::set<std::string> weight_targets() { return {"w_in", "w_rec"}; }
  void validate() const;
  bool targets_weights() const { return targets.contains("w_in") || targets.contains("w_rec"); }

  /// Draw index in use at a given training epoch.
  std::uint64_t draw_index(std::uint64_t epoch) const {
    return epoch / static_cast<std::uint64_t>(refresh_period);
  }
};

/// Multiplicative factors of one mismatch draw. Current factors are stored
/// per neuron; the floor is applied when the draw is applied.
struct MismatchDraw {
  std::vector<std::array<double, kCurrentCount>> current_factor;
  MatrixXd w_in_factor;
  MatrixXd w_rec_factor;
};

/// Gaussian perturbation of one current: max(p * (1 + sigma * z), floor).
inline double perturb_current(double p, double sigma, double z) {
  return std::max(p * (1.0 + sigma * z), kCurrentFloor);
}

/// Deterministic in (spec.seed, draw_index). Every neuron draws its own
/// value for each targeted current.
MismatchDraw draw_mismatch(const Network& nominal, const MismatchSpec& spec,
                           std::uint64_t draw_index);

Network apply_mismatch(const Network& nominal, const MismatchDraw& draw);

inline Network sample_mismatch(const Network& nominal, const MismatchSpec& spec,
                               std::uint64_t draw_index) {
  return apply_mismatch(nominal, draw_mismatch(nominal, spec, draw_index));
}

/// Loss gradients with respect to the parameters of a Network. Current
/// gradients are optional (zero when absent).
struct NetworkGradient {
  MatrixXd w_in;
  MatrixXd w_rec;
  std::vector<std::array<double, kCurrentCount>> currents;
};

/// Relative ascent step on every targeted parameter:
/// p + step * |p| * sign(dL/dp), currents floored at kCurrentFloor.
Network adversarial_perturb(const Network& params, const NetworkGradient& grad, double step_size,
                            const std::set<std::string>& targets = MismatchSpec::default_targets());

}  // namespace mixsnn

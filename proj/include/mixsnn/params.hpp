#pragma once

#include "mixsnn/common.hpp"

#include <array>
#include <optional>
#include <span>
#include <string_view>

namespace mixsnn {

/// Leakage floor. Every current in the model is clipped here.
inline constexpr double kCurrentFloor = 1e-15;

enum class Synapse : int { ampa = 0, gaba, nmda, shunt, ahp };
inline constexpr int kSynapseCount = 5;

std::string_view synapse_name(Synapse s);

/// Device-level physical constants used when converting bias currents into
/// time constants.
struct PhysicalConstants {
  double U_T = 25e-3;
  double kappa = 0.7;
  double C_mem = 3e-12;
  std::array<double, kSynapseCount> C_syn{25e-15, 25e-15, 25e-15, 25e-15, 25e-15};
  double C_ref = 0.5e-12;
  double C_pulse = 0.5e-12;

  /// Throws ValidationError unless every value is positive and 0 < kappa < 1.
  void validate() const;
};

/// Named analog currents of one neuron/core parameter group.
enum class Current : int {
  Itau_mem = 0,
  Igain_mem,
  Ispkthr,
  Ireset,
  Idc,
  Iref,
  Ipulse,
  Itau_ampa,
  Itau_gaba,
  Itau_nmda,
  Itau_shunt,
  Itau_ahp,
  Igain_ampa,
  Igain_gaba,
  Igain_nmda,
  Igain_shunt,
  Igain_ahp,
  Iw_ahp,
  Iw_base0,
  Iw_base1,
  Iw_base2,
  Iw_base3,
  // Simulation-only: current represented by one unit of a floating-point
  // weight. Folded into the base weights at deployment.
  Iw_ref,
};
inline constexpr int kCurrentCount = static_cast<int>(Current::Iw_ref) + 1;

std::string_view current_name(Current c);
std::optional<Current> current_from_name(std::string_view name);
std::span<const Current> all_currents();
/// Currents that exist as bias generators on the chip (everything but Iw_ref).
std::span<const Current> hardware_currents();

inline Current tau_current(Synapse s) {
  return static_cast<Current>(static_cast<int>(Current::Itau_ampa) + static_cast<int>(s));
}
inline Current gain_current(Synapse s) {
  return static_cast<Current>(static_cast<int>(Current::Igain_ampa) + static_cast<int>(s));
}
inline Current base_weight_current(int k) {
  return static_cast<Current>(static_cast<int>(Current::Iw_base0) + k);
}

/// The simulated parameter subset of one core. Of the chip's ~70 biases only
/// these are modelled; the rest (amplifier biases, NMDA gate, homeostasis,
/// exponential feedback) are not simulated.
struct SimParams {
  std::array<double, kCurrentCount> currents{};
  double dt = 1e-3;

  double& operator[](Current c) { return currents[static_cast<std::size_t>(c)]; }
  double operator[](Current c) const { return currents[static_cast<std::size_t>(c)]; }

  /// Throws ValidationError if any current is below the floor or not finite,
  /// or if dt is not positive.
  void validate() const;

  bool operator==(const SimParams&) const = default;
};

/// tau = C * U_T / (kappa * Itau).
inline double derive_time_constant(double itau, double capacitance,
                                   const PhysicalConstants& k) {
  return capacitance * k.U_T / (k.kappa * itau);
}

/// Inverse of derive_time_constant.
inline double current_for_time_constant(double tau, double capacitance,
                                        const PhysicalConstants& k) {
  return capacitance * k.U_T / (k.kappa * tau);
}

/// Behavioural description of a neuron, used to build a SimParams.
struct BehaviorTargets {
  double tau_mem = 50e-3;
  std::array<double, kSynapseCount> tau_syn{100e-3, 100e-3, 100e-3, 10e-3, 50e-3};
  double t_ref = 4e-3;
  double t_pulse = 100e-6;
  double threshold = 1e-9;
  double mem_gain_ratio = 4.0;
  std::array<double, kSynapseCount> syn_gain_ratio{40.0, 40.0, 40.0, 40.0, 1.0};
  double dc = kCurrentFloor;
  double ahp_weight = 5e-11;
  /// Current of one unit of simulated weight (Iw_ref).
  double weight_unit = 2e-10;
  double dt = 1e-3;
};

/// Solves the behavioural targets for the bias currents that realise them.
SimParams make_params(const BehaviorTargets& targets, const PhysicalConstants& k = {});

/// Toy-task defaults: 50 ms membrane, 100 ms AMPA/GABA, 4 ms refractory period.
inline SimParams default_params() { return make_params(BehaviorTargets{}); }

}  // namespace mixsnn

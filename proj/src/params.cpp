#include "mixsnn/params.hpp"

#include <algorithm>
#include <cmath>

namespace mixsnn {

namespace {

constexpr std::array<std::string_view, kCurrentCount> kCurrentNames{
    "Itau_mem",   "Igain_mem",  "Ispkthr",    "Ireset",      "Idc",
    "Iref",       "Ipulse",     "Itau_ampa",  "Itau_gaba",   "Itau_nmda",
    "Itau_shunt", "Itau_ahp",   "Igain_ampa", "Igain_gaba",  "Igain_nmda",
    "Igain_shunt", "Igain_ahp", "Iw_ahp",     "Iw_base0",    "Iw_base1",
    "Iw_base2",   "Iw_base3",   "Iw_ref"};

constexpr auto kAllCurrents = [] {
  std::array<Current, kCurrentCount> out{};
  for (int i = 0; i < kCurrentCount; ++i) out[i] = static_cast<Current>(i);
  return out;
}();

}  // namespace

std::string_view synapse_name(Synapse s) {
  static constexpr std::array<std::string_view, kSynapseCount> names{"AMPA", "GABA", "NMDA",
                                                                     "SHUNT", "AHP"};
  return names[static_cast<std::size_t>(s)];
}

std::string_view current_name(Current c) { return kCurrentNames[static_cast<std::size_t>(c)]; }

std::optional<Current> current_from_name(std::string_view name) {
  auto it = std::find(kCurrentNames.begin(), kCurrentNames.end(), name);
  if (it == kCurrentNames.end()) return std::nullopt;
  return static_cast<Current>(it - kCurrentNames.begin());
}

std::span<const Current> all_currents() { return kAllCurrents; }

std::span<const Current> hardware_currents() {
  return std::span<const Current>(kAllCurrents).first(kCurrentCount - 1);
}

void PhysicalConstants::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  bool ok = positive(U_T) && positive(C_mem) && positive(C_ref) && positive(C_pulse) &&
            positive(kappa) && kappa < 1.0;
  for (double c : C_syn) ok = ok && positive(c);
  if (!ok) throw ValidationError("physical constants must be positive with 0 < kappa < 1");
}

void SimParams::validate() const {
  for (Current c : all_currents()) {
    double v = (*this)[c];
    if (!std::isfinite(v) || v < kCurrentFloor) {
      throw ValidationError("current " + std::string(current_name(c)) + " = " +
                            std::to_string(v) + " is below the leakage floor or not finite");
    }
  }
  if (!std::isfinite(dt) || dt <= 0.0) throw ValidationError("dt must be positive");
}

SimParams make_params(const BehaviorTargets& t, const PhysicalConstants& k) {
  k.validate();
  SimParams p;
  p.dt = t.dt;
  p[Current::Itau_mem] = current_for_time_constant(t.tau_mem, k.C_mem, k);
  p[Current::Igain_mem] = t.mem_gain_ratio * p[Current::Itau_mem];
  p[Current::Ispkthr] = t.threshold;
  p[Current::Ireset] = kCurrentFloor;
  p[Current::Idc] = std::max(t.dc, kCurrentFloor);
  p[Current::Iref] = current_for_time_constant(t.t_ref, k.C_ref, k);
  p[Current::Ipulse] = current_for_time_constant(t.t_pulse, k.C_pulse, k);
  for (int s = 0; s < kSynapseCount; ++s) {
    auto syn = static_cast<Synapse>(s);
    p[tau_current(syn)] = current_for_time_constant(t.tau_syn[s], k.C_syn[s], k);
    p[gain_current(syn)] = t.syn_gain_ratio[s] * p[tau_current(syn)];
  }
  p[Current::Iw_ahp] = std::max(t.ahp_weight, kCurrentFloor);
  for (int b = 0; b < 4; ++b) p[base_weight_current(b)] = t.weight_unit * std::ldexp(1.0, b - 1);
  p[Current::Iw_ref] = t.weight_unit;
  return p;
}

}  // namespace mixsnn

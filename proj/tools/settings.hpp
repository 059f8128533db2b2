#pragma once

#include "mixsnn/device.hpp"
#include "mixsnn/experiments.hpp"
#include "mixsnn/io.hpp"

namespace mixsnn::cli {

/// Every tunable of the pipeline. A settings file holds any subset of the
/// keys of `to_json(Settings{})`; missing keys keep their defaults.
struct Settings {
  FrozenNoiseParams data;
  BehaviorTargets neuron;
  WeightInit init;
  TrainConfig train;
  AutoencoderConfig quantizer;
  HardwareLimits hardware;
  double table_i0 = 2.5e-13;
  double device_sigma = 0.2;
  long device_tests = 10;
  int bench_epochs = 1000;
};

inline Json to_json(const Settings& s) {
  const auto& m = s.train.mismatch;
  return {
      {"data",
       {{"rate_hz", s.data.rate_hz},
        {"duration_s", s.data.duration_s},
        {"dt", s.data.dt},
        {"n_channels", s.data.n_channels},
        {"n_test", s.data.n_test}}},
      {"neuron",
       {{"tau_mem", s.neuron.tau_mem},
        {"tau_syn", s.neuron.tau_syn},
        {"t_ref", s.neuron.t_ref},
        {"t_pulse", s.neuron.t_pulse},
        {"threshold", s.neuron.threshold},
        {"mem_gain_ratio", s.neuron.mem_gain_ratio},
        {"syn_gain_ratio", s.neuron.syn_gain_ratio},
        {"dc", s.neuron.dc},
        {"ahp_weight", s.neuron.ahp_weight},
        {"weight_unit", s.neuron.weight_unit}}},
      {"init", {{"in_mean", s.init.in_mean}, {"in_std", s.init.in_std}, {"rec_std", s.init.rec_std}}},
      {"train",
       {{"epochs", s.train.epochs},
        {"learning_rate", s.train.learning_rate},
        {"surrogate_slope", s.train.surrogate_slope},
        {"trainable", s.train.trainable},
        {"weight_limit", s.train.weight_limit},
        {"recurrent_limit", s.train.recurrent_limit},
        {"adversarial_step", s.train.adversarial_step},
        {"mismatch_enabled", s.train.mismatch_enabled},
        {"mismatch",
         {{"sigma_rel", m.sigma_rel}, {"refresh_period", m.refresh_period}, {"targets", m.targets}}}}},
      {"quantizer",
       {{"steps", s.quantizer.steps},
        {"learning_rate", s.quantizer.learning_rate},
        {"restarts", s.quantizer.restarts}}},
      {"hardware",
       {{"neurons_per_core", s.hardware.neurons_per_core},
        {"cores_per_chip", s.hardware.cores_per_chip},
        {"synapses_per_neuron", s.hardware.synapses_per_neuron},
        {"chips_available", s.hardware.chips_available}}},
      {"bias_table", {{"i0", s.table_i0}}},
      {"device", {{"sigma_rel", s.device_sigma}, {"n_test", s.device_tests}}},
      {"bench", {{"epochs", s.bench_epochs}}},
  };
}

namespace detail {
template <typename T>
void take(const Json& j, const char* section, const char* key, T& out) {
  if (j.contains(section) && j[section].contains(key)) out = j[section][key].get<T>();
}
}  // namespace detail

/// Overlays the keys present in `j` onto the defaults. Unknown sections or
/// keys are rejected so typos do not pass silently.
inline Settings settings_from_json(const Json& j) {
  const Json defaults = to_json(Settings{});
  for (const auto& [section, body] : j.items()) {
    if (!defaults.contains(section)) throw ValidationError("unknown settings section '" + section + "'");
    for (const auto& [key, value] : body.items()) {
      if (!defaults[section].contains(key)) throw ValidationError("unknown setting " + section + "." + key);
    }
  }
  Settings s;
  try {
    using detail::take;
    take(j, "data", "rate_hz", s.data.rate_hz);
    take(j, "data", "duration_s", s.data.duration_s);
    take(j, "data", "dt", s.data.dt);
    take(j, "data", "n_channels", s.data.n_channels);
    take(j, "data", "n_test", s.data.n_test);
    take(j, "neuron", "tau_mem", s.neuron.tau_mem);
    take(j, "neuron", "tau_syn", s.neuron.tau_syn);
    take(j, "neuron", "t_ref", s.neuron.t_ref);
    take(j, "neuron", "t_pulse", s.neuron.t_pulse);
    take(j, "neuron", "threshold", s.neuron.threshold);
    take(j, "neuron", "mem_gain_ratio", s.neuron.mem_gain_ratio);
    take(j, "neuron", "syn_gain_ratio", s.neuron.syn_gain_ratio);
    take(j, "neuron", "dc", s.neuron.dc);
    take(j, "neuron", "ahp_weight", s.neuron.ahp_weight);
    take(j, "neuron", "weight_unit", s.neuron.weight_unit);
    take(j, "init", "in_mean", s.init.in_mean);
    take(j, "init", "in_std", s.init.in_std);
    take(j, "init", "rec_std", s.init.rec_std);
    take(j, "train", "epochs", s.train.epochs);
    take(j, "train", "learning_rate", s.train.learning_rate);
    take(j, "train", "surrogate_slope", s.train.surrogate_slope);
    take(j, "train", "trainable", s.train.trainable);
    take(j, "train", "weight_limit", s.train.weight_limit);
    take(j, "train", "recurrent_limit", s.train.recurrent_limit);
    take(j, "train", "adversarial_step", s.train.adversarial_step);
    take(j, "train", "mismatch_enabled", s.train.mismatch_enabled);
    if (j.contains("train") && j["train"].contains("mismatch")) {
      const Json& m = j["train"]["mismatch"];
      if (m.contains("sigma_rel")) s.train.mismatch.sigma_rel = m["sigma_rel"].get<double>();
      if (m.contains("refresh_period")) s.train.mismatch.refresh_period = m["refresh_period"].get<int>();
      if (m.contains("targets")) s.train.mismatch.targets = m["targets"].get<std::set<std::string>>();
    }
    take(j, "quantizer", "steps", s.quantizer.steps);
    take(j, "quantizer", "learning_rate", s.quantizer.learning_rate);
    take(j, "quantizer", "restarts", s.quantizer.restarts);
    take(j, "hardware", "neurons_per_core", s.hardware.neurons_per_core);
    take(j, "hardware", "cores_per_chip", s.hardware.cores_per_chip);
    take(j, "hardware", "synapses_per_neuron", s.hardware.synapses_per_neuron);
    take(j, "hardware", "chips_available", s.hardware.chips_available);
    take(j, "bias_table", "i0", s.table_i0);
    take(j, "device", "sigma_rel", s.device_sigma);
    take(j, "device", "n_test", s.device_tests);
    take(j, "bench", "epochs", s.bench_epochs);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed settings: ") + e.what());
  }
  return s;
}

}  // namespace mixsnn::cli

#include "mixsnn/neuron.hpp"

#include <algorithm>
#include <cmath>

namespace mixsnn {

namespace {

double decay_factor(double dt, double tau, Integrator integrator) {
  if (integrator == Integrator::exponential_euler) return std::exp(-dt / tau);
  if (dt > tau) throw ParameterError("forward Euler requires dt <= tau");
  return 1.0 - dt / tau;
}

void check_finite(const NeuronState& s) {
  bool ok = std::isfinite(s.Imem);
  for (double i : s.Isyn) ok = ok && std::isfinite(i);
  if (!ok) throw NumericalError("neuron state became non-finite");
}

constexpr int idx(Synapse s) { return static_cast<int>(s); }

}  // namespace

int refractory_steps(const SimParams& p, const PhysicalConstants& k) {
  double t_ref = derive_time_constant(p[Current::Iref], k.C_ref, k);
  return static_cast<int>(std::floor(t_ref / p.dt + 0.5));
}

NeuronCoefficients NeuronCoefficients::from(const SimParams& p, const PhysicalConstants& k,
                                            Integrator integrator) {
  p.validate();
  NeuronCoefficients c;
  double tau_mem = derive_time_constant(p[Current::Itau_mem], k.C_mem, k);
  c.mem_decay = decay_factor(p.dt, tau_mem, integrator);
  c.mem_input = integrator == Integrator::exponential_euler ? 1.0 - c.mem_decay : p.dt / tau_mem;
  c.mem_gain = p[Current::Igain_mem] / p[Current::Itau_mem];
  c.threshold = p[Current::Ispkthr];
  c.reset = p[Current::Ireset];
  c.dc = p[Current::Idc];
  double t_pulse = derive_time_constant(p[Current::Ipulse], k.C_pulse, k);
  for (int s = 0; s < kSynapseCount; ++s) {
    auto syn = static_cast<Synapse>(s);
    double tau = derive_time_constant(p[tau_current(syn)], k.C_syn[s], k);
    c.syn_decay[s] = decay_factor(p.dt, tau, integrator);
    double pulse = -std::expm1(-t_pulse / tau);
    double weight_current = syn == Synapse::ahp ? p[Current::Iw_ahp] : p[Current::Iw_ref];
    c.syn_jump[s] = weight_current * (p[gain_current(syn)] / p[tau_current(syn)]) * pulse;
  }
  c.refractory_steps = mixsnn::refractory_steps(p, k);
  return c;
}

double soma_input(const NeuronState& s, const NeuronCoefficients& c) {
  double in = s.Isyn[idx(Synapse::ampa)] + s.Isyn[idx(Synapse::nmda)] + c.dc -
              s.Isyn[idx(Synapse::gaba)] - s.Isyn[idx(Synapse::shunt)] -
              s.Isyn[idx(Synapse::ahp)];
  return std::max(in, kCurrentFloor);
}

NeuronState step(const NeuronState& state, const SynapticDrive& drive,
                 const NeuronCoefficients& c) {
  NeuronState next = state;
  for (int s = 0; s < kSynapseCount; ++s) {
    double injected = s == idx(Synapse::ahp) ? 0.0 : drive[s] * c.syn_jump[s];
    next.Isyn[s] = std::max(state.Isyn[s] * c.syn_decay[s] + injected, kCurrentFloor);
  }
  next.spike_out = false;
  if (state.refractory_remaining > 0) {
    next.Imem = c.reset;
    next.refractory_remaining = state.refractory_remaining - 1;
  } else {
    double v = state.Imem * c.mem_decay + c.mem_input * c.mem_gain * soma_input(next, c);
    v = std::max(v, kCurrentFloor);
    if (v >= c.threshold) {
      next.spike_out = true;
      next.Imem = c.reset;
      next.Isyn[idx(Synapse::ahp)] += c.syn_jump[idx(Synapse::ahp)];
      next.refractory_remaining = c.refractory_steps;
    } else {
      next.Imem = v;
    }
  }
  check_finite(next);
  return next;
}

double Network::dt() const {
  if (params.empty()) throw ValidationError("network has no neurons");
  return params.front().dt;
}

void Network::validate() const {
  if (w_rec.rows() != w_rec.cols()) throw DimensionError("recurrent weights must be square");
  if (w_in.cols() != w_rec.rows()) {
    throw DimensionError("input weights have " + std::to_string(w_in.cols()) +
                         " columns but the network has " + std::to_string(w_rec.rows()) +
                         " neurons");
  }
  if (static_cast<Index>(params.size()) != w_rec.rows()) {
    throw DimensionError("one SimParams per neuron required");
  }
  if (!w_in.allFinite() || !w_rec.allFinite()) throw ValidationError("weights must be finite");
  for (const auto& p : params) {
    p.validate();
    if (p.dt != params.front().dt) throw ValidationError("all neurons must share dt");
  }
}

Network make_network(MatrixXd w_in, MatrixXd w_rec, const SimParams& params) {
  Network net{std::move(w_in), std::move(w_rec), {}};
  net.params.assign(static_cast<std::size_t>(net.w_rec.rows()), params);
  return net;
}

EvolveResult evolve(const Network& net, const SpikeRaster& input, const EvolveOptions& options,
                    std::vector<NeuronState> initial) {
  net.validate();
  const Index n = net.n_neurons();
  const Index steps = input.n_steps();
  if (input.n_channels() != net.n_inputs()) {
    throw DimensionError("raster has " + std::to_string(input.n_channels()) +
                         " channels but the network expects " + std::to_string(net.n_inputs()));
  }
  if (initial.empty()) initial.assign(static_cast<std::size_t>(n), NeuronState{});
  if (static_cast<Index>(initial.size()) != n) throw DimensionError("initial state size mismatch");

  std::vector<NeuronCoefficients> coeff;
  coeff.reserve(static_cast<std::size_t>(n));
  for (const auto& p : net.params) {
    coeff.push_back(NeuronCoefficients::from(p, options.constants, options.integrator));
  }

  const MatrixXd in_exc = net.w_in.cwiseMax(0.0);
  const MatrixXd in_inh = (-net.w_in).cwiseMax(0.0);
  const MatrixXd rec_exc = net.w_rec.cwiseMax(0.0);
  const MatrixXd rec_inh = (-net.w_rec).cwiseMax(0.0);

  EvolveResult result{SpikeRaster(steps, n, net.params.empty() ? input.dt() : net.dt()),
                      std::move(initial), std::nullopt};
  if (options.record) {
    result.traces = StateTraces{MatrixXd::Zero(steps, n), MatrixXd::Zero(steps, n),
                                MatrixXd::Zero(steps, n), MatrixXd::Zero(steps, n),
                                MatrixXd::Zero(steps, n)};
  }

  auto& state = result.final_state;
  VectorXd exc(n), inh(n);
  for (Index t = 0; t < steps; ++t) {
    exc.setZero();
    inh.setZero();
    for (Index i = 0; i < input.n_channels(); ++i) {
      if (input(t, i)) {
        exc += in_exc.row(i).transpose();
        inh += in_inh.row(i).transpose();
      }
    }
    for (Index k = 0; k < n; ++k) {
      if (state[k].spike_out) {
        exc += rec_exc.row(k).transpose();
        inh += rec_inh.row(k).transpose();
      }
    }
    for (Index j = 0; j < n; ++j) {
      SynapticDrive drive{};
      drive[idx(Synapse::ampa)] = exc(j);
      drive[idx(Synapse::gaba)] = inh(j);
      state[j] = step(state[j], drive, coeff[j]);
      result.output.set(t, j, state[j].spike_out);
      if (result.traces) {
        auto& tr = *result.traces;
        tr.Imem(t, j) = state[j].Imem;
        tr.Iin(t, j) = soma_input(state[j], coeff[j]);
        tr.Iampa(t, j) = state[j].syn(Synapse::ampa);
        tr.Igaba(t, j) = state[j].syn(Synapse::gaba);
        tr.Iahp(t, j) = state[j].Iahp();
      }
    }
  }
  return result;
}

}  // namespace mixsnn

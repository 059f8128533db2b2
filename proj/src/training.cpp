#include "mixsnn/training.hpp"

#include <cmath>
#include <random>

namespace mixsnn {

namespace {

constexpr int kAmpa = static_cast<int>(Synapse::ampa);
constexpr int kGaba = static_cast<int>(Synapse::gaba);
constexpr int kNmda = static_cast<int>(Synapse::nmda);
constexpr int kShunt = static_cast<int>(Synapse::shunt);
constexpr int kAhp = static_cast<int>(Synapse::ahp);

// Per (step, neuron) quantities the backward sweep needs.
struct TapeEntry {
  double v = 0.0;      // membrane candidate before threshold
  double s = 0.0;      // spike (binary or smooth)
  bool refractory = false;
  bool a_clip = false, g_clip = false, h_clip = false, in_clip = false, v_clip = false;
};

struct Tape {
  Index steps = 0, neurons = 0;
  std::vector<TapeEntry> entries;  // row-major (step, neuron)
  std::vector<std::vector<Index>> active;  // active input channels per step
  TapeEntry& at(Index t, Index j) { return entries[static_cast<std::size_t>(t * neurons + j)]; }
};

std::vector<std::vector<Index>> active_channels(const SpikeRaster& input) {
  std::vector<std::vector<Index>> active(static_cast<std::size_t>(input.n_steps()));
  for (Index t = 0; t < input.n_steps(); ++t) {
    for (Index i = 0; i < input.n_channels(); ++i) {
      if (input(t, i)) active[static_cast<std::size_t>(t)].push_back(i);
    }
  }
  return active;
}

struct Forward {
  MatrixXd output;
  std::vector<NeuronCoefficients> coeff;
};

Forward run_forward(const Network& net, const SpikeRaster& input, const BpttOptions& opt,
                    Tape* tape) {
  net.validate();
  if (input.n_channels() != net.n_inputs()) throw DimensionError("input raster width mismatch");
  const Index n = net.n_neurons();
  const Index steps = input.n_steps();
  const bool smooth = opt.mode == ForwardMode::smooth;

  Forward fw;
  fw.output = MatrixXd::Zero(steps, n);
  for (const auto& p : net.params) fw.coeff.push_back(NeuronCoefficients::from(p, opt.constants));

  auto active = active_channels(input);
  if (tape) {
    tape->steps = steps;
    tape->neurons = n;
    tape->entries.assign(static_cast<std::size_t>(steps * n), TapeEntry{});
  }

  const MatrixXd in_exc = net.w_in.cwiseMax(0.0);
  const MatrixXd in_inh = (-net.w_in).cwiseMax(0.0);
  const MatrixXd rec_exc = net.w_rec.cwiseMax(0.0);
  const MatrixXd rec_inh = (-net.w_rec).cwiseMax(0.0);

  std::vector<NeuronState> state(static_cast<std::size_t>(n));
  VectorXd prev_s = VectorXd::Zero(n);
  VectorXd exc(n), inh(n);
  for (Index t = 0; t < steps; ++t) {
    exc.setZero();
    inh.setZero();
    for (Index i : active[static_cast<std::size_t>(t)]) {
      exc += in_exc.row(i).transpose();
      inh += in_inh.row(i).transpose();
    }
    for (Index k = 0; k < n; ++k) {
      if (smooth) {
        exc += prev_s(k) * rec_exc.row(k).transpose();
        inh += prev_s(k) * rec_inh.row(k).transpose();
      } else if (prev_s(k) != 0.0) {
        exc += rec_exc.row(k).transpose();
        inh += rec_inh.row(k).transpose();
      }
    }
    for (Index j = 0; j < n; ++j) {
      const auto& c = fw.coeff[static_cast<std::size_t>(j)];
      auto& st = state[static_cast<std::size_t>(j)];
      TapeEntry e;
      double a = st.Isyn[kAmpa] * c.syn_decay[kAmpa] + exc(j) * c.syn_jump[kAmpa];
      double g = st.Isyn[kGaba] * c.syn_decay[kGaba] + inh(j) * c.syn_jump[kGaba];
      double h = st.Isyn[kAhp] * c.syn_decay[kAhp] + 0.0;
      e.a_clip = a < kCurrentFloor;
      e.g_clip = g < kCurrentFloor;
      e.h_clip = h < kCurrentFloor;
      st.Isyn[kAmpa] = std::max(a, kCurrentFloor);
      st.Isyn[kGaba] = std::max(g, kCurrentFloor);
      st.Isyn[kAhp] = std::max(h, kCurrentFloor);
      st.Isyn[kNmda] = std::max(st.Isyn[kNmda] * c.syn_decay[kNmda] + 0.0, kCurrentFloor);
      st.Isyn[kShunt] = std::max(st.Isyn[kShunt] * c.syn_decay[kShunt] + 0.0, kCurrentFloor);
      double raw_in = st.Isyn[kAmpa] + st.Isyn[kNmda] + c.dc - st.Isyn[kGaba] - st.Isyn[kShunt] -
                      st.Isyn[kAhp];
      e.in_clip = raw_in < kCurrentFloor;
      double in = std::max(raw_in, kCurrentFloor);

      double s = 0.0;
      if (!smooth && st.refractory_remaining > 0) {
        e.refractory = true;
        st.Imem = c.reset;
        --st.refractory_remaining;
      } else {
        double v = st.Imem * c.mem_decay + c.mem_input * c.mem_gain * in;
        e.v_clip = v < kCurrentFloor;
        v = std::max(v, kCurrentFloor);
        e.v = v;
        if (smooth) {
          s = smooth_spike(v / c.threshold, opt.surrogate_slope);
          st.Imem = s * c.reset + (1.0 - s) * v;
          st.Isyn[kAhp] += s * c.syn_jump[kAhp];
        } else if (v >= c.threshold) {
          s = 1.0;
          st.Imem = c.reset;
          st.Isyn[kAhp] += c.syn_jump[kAhp];
          st.refractory_remaining = c.refractory_steps;
        } else {
          st.Imem = v;
        }
      }
      if (!std::isfinite(st.Imem) || !std::isfinite(in)) {
        throw NumericalError("state became non-finite at step " + std::to_string(t));
      }
      e.s = s;
      fw.output(t, j) = s;
      if (tape) tape->at(t, j) = e;
    }
    prev_s = fw.output.row(t).transpose();
  }
  if (tape) tape->active = std::move(active);
  return fw;
}

void check_target(const Network& net, const SpikeRaster& input, const MatrixXd& target) {
  if (target.rows() != input.n_steps() || target.cols() != net.n_neurons()) {
    throw DimensionError("target must be n_steps x n_neurons");
  }
}

}  // namespace

double mse_spike_loss(const SpikeRaster& y_out, const SpikeRaster& y_target) {
  return mse_spike_loss(y_out.data(), y_target.data());
}

SpikeRaster make_target(int class_index, Index n_steps, Index n_channels, double dt) {
  if (class_index < 0 || class_index >= n_channels) throw ParameterError("class index out of range");
  SpikeRaster target(n_steps, n_channels, dt);
  for (Index t = 0; t < n_steps; ++t) target.set(t, class_index, true);
  return target;
}

double forward_loss(const Network& net, const SpikeRaster& input, const MatrixXd& target,
                    const BpttOptions& options) {
  check_target(net, input, target);
  auto fw = run_forward(net, input, options, nullptr);
  return mse_spike_loss(fw.output, target);
}

LossGradient loss_and_gradient(const Network& net, const SpikeRaster& input,
                               const MatrixXd& target, const BpttOptions& options) {
  check_target(net, input, target);
  Tape tape;
  auto fw = run_forward(net, input, options, &tape);
  const Index n = net.n_neurons();
  const Index steps = input.n_steps();

  LossGradient out;
  out.loss = mse_spike_loss(fw.output, target);
  out.w_in = MatrixXd::Zero(net.w_in.rows(), net.w_in.cols());
  out.w_rec = MatrixXd::Zero(n, n);
  out.output = fw.output;
  if (steps == 0 || n == 0) return out;

  const double scale = 2.0 / static_cast<double>(steps * n);
  const MatrixXd rec_exc = net.w_rec.cwiseMax(0.0);
  const MatrixXd rec_inh = (-net.w_rec).cwiseMax(0.0);

  // Adjoints of the state after step t, carried backwards.
  VectorXd lam_a = VectorXd::Zero(n), lam_g = VectorXd::Zero(n), lam_h = VectorXd::Zero(n),
           lam_m = VectorXd::Zero(n);
  VectorXd lam_s_rec = VectorXd::Zero(n);  // from the recurrent drive of step t+1
  VectorXd g_exc(n), g_inh(n);

  for (Index t = steps - 1; t >= 0; --t) {
    for (Index j = 0; j < n; ++j) {
      const auto& c = fw.coeff[static_cast<std::size_t>(j)];
      const TapeEntry& e = tape.at(t, j);
      double ds = scale * (e.s - target(t, j)) + lam_s_rec(j);
      double dm_prev = 0.0;
      double d_in = 0.0;
      double d_hd = lam_h(j);  // AHP after the (optional) jump is Hd + s * jump
      if (!e.refractory) {
        double d_s_total = ds + lam_m(j) * (c.reset - e.v) + lam_h(j) * c.syn_jump[kAhp];
        double surrogate = surrogate_spike(e.v / c.threshold, options.surrogate_slope).derivative;
        double dv = lam_m(j) * (1.0 - e.s) + d_s_total * surrogate / c.threshold;
        if (!e.v_clip) {
          dm_prev = dv * c.mem_decay;
          d_in = dv * c.mem_input * c.mem_gain;
        }
      }
      double da = lam_a(j), dg = lam_g(j);
      if (!e.in_clip) {
        da += d_in;
        dg -= d_in;
        d_hd -= d_in;
      }
      g_exc(j) = e.a_clip ? 0.0 : da * c.syn_jump[kAmpa];
      g_inh(j) = e.g_clip ? 0.0 : dg * c.syn_jump[kGaba];
      lam_a(j) = e.a_clip ? 0.0 : da * c.syn_decay[kAmpa];
      lam_g(j) = e.g_clip ? 0.0 : dg * c.syn_decay[kGaba];
      lam_h(j) = e.h_clip ? 0.0 : d_hd * c.syn_decay[kAhp];
      lam_m(j) = dm_prev;
    }
    // Weight gradients; positive weights feed AMPA, negative feed GABA.
    for (Index i : tape.active[static_cast<std::size_t>(t)]) {
      for (Index j = 0; j < n; ++j) {
        out.w_in(i, j) += net.w_in(i, j) >= 0.0 ? g_exc(j) : -g_inh(j);
      }
    }
    lam_s_rec.setZero();
    if (t > 0) {
      for (Index k = 0; k < n; ++k) {
        double s_prev = fw.output(t - 1, k);
        for (Index j = 0; j < n; ++j) {
          double w = net.w_rec(k, j);
          if (s_prev != 0.0) out.w_rec(k, j) += s_prev * (w >= 0.0 ? g_exc(j) : -g_inh(j));
          lam_s_rec(k) += rec_exc(k, j) * g_exc(j) + rec_inh(k, j) * g_inh(j);
        }
      }
    }
  }
  return out;
}

LossGradient batch_loss_and_gradient(const Network& net, std::span<const LabeledRaster> batch,
                                     const BpttOptions& options) {
  if (batch.empty()) throw ParameterError("empty batch");
  LossGradient total;
  total.w_in = MatrixXd::Zero(net.w_in.rows(), net.w_in.cols());
  total.w_rec = MatrixXd::Zero(net.w_rec.rows(), net.w_rec.cols());
  for (const auto& sample : batch) {
    MatrixXd target =
        make_target(sample.label, sample.raster.n_steps(), net.n_neurons(), sample.raster.dt())
            .as_double();
    auto g = loss_and_gradient(net, sample.raster, target, options);
    total.loss += g.loss;
    total.w_in += g.w_in;
    total.w_rec += g.w_rec;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  total.loss *= inv;
  total.w_in *= inv;
  total.w_rec *= inv;
  return total;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ParameterError("epochs must be >= 1");
  adam().validate();
  if (!(surrogate_slope > 0.0)) throw ParameterError("surrogate slope must be positive");
  for (const auto& name : trainable) {
    if (name != "w_in" && name != "w_rec") {
      throw ParameterError("only w_in and w_rec are trainable, got " + name);
    }
  }
  if (adversarial_step < 0.0) throw ParameterError("adversarial step must be >= 0");
  mismatch.validate();
}

LossRecord train(const Network& initial, std::span<const LabeledRaster> dataset,
                 const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (dataset.empty()) throw ParameterError("training set is empty");
  initial.validate();

  const AdamConfig adam = cfg.adam();
  const BpttOptions bptt{cfg.surrogate_slope, ForwardMode::hard, {}};
  const bool train_in = cfg.trainable.contains("w_in");
  const bool train_rec = cfg.trainable.contains("w_rec");
  const bool use_mismatch = cfg.mismatch_enabled && cfg.mismatch.sigma_rel > 0.0;

  LossRecord record;
  record.final_params = initial;
  Network& params = record.final_params;
  record.loss.reserve(static_cast<std::size_t>(cfg.epochs));

  AdamMoments<> m_in(params.w_in.rows(), params.w_in.cols());
  AdamMoments<> m_rec(params.w_rec.rows(), params.w_rec.cols());
  MismatchDraw draw;
  std::uint64_t current_draw = ~std::uint64_t{0};

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Network effective = params;
    MatrixXd f_in = MatrixXd::Ones(params.w_in.rows(), params.w_in.cols());
    MatrixXd f_rec = MatrixXd::Ones(params.w_rec.rows(), params.w_rec.cols());
    bool refresh_epoch = true;
    if (use_mismatch) {
      std::uint64_t idx = cfg.mismatch.draw_index(static_cast<std::uint64_t>(epoch));
      refresh_epoch = idx != current_draw;
      if (refresh_epoch) {
        draw = draw_mismatch(params, cfg.mismatch, idx);
        current_draw = idx;
      }
      effective = apply_mismatch(params, draw);
      f_in = draw.w_in_factor;
      f_rec = draw.w_rec_factor;
    }
    if (cfg.adversarial_step > 0.0 && !refresh_epoch) {
      auto probe = batch_loss_and_gradient(effective, dataset, bptt);
      NetworkGradient g{probe.w_in, probe.w_rec, {}};
      Network attacked = adversarial_perturb(effective, g, cfg.adversarial_step, cfg.mismatch.targets);
      // Chain rule through the attack: dp'/dp = 1 + step * sign(p) * sign(g).
      for (Index i = 0; i < f_in.size(); ++i) {
        double p = effective.w_in.data()[i];
        f_in.data()[i] *= p == 0.0 ? 1.0 : attacked.w_in.data()[i] / p;
      }
      for (Index i = 0; i < f_rec.size(); ++i) {
        double p = effective.w_rec.data()[i];
        f_rec.data()[i] *= p == 0.0 ? 1.0 : attacked.w_rec.data()[i] / p;
      }
      effective = std::move(attacked);
    }

    auto grad = batch_loss_and_gradient(effective, dataset, bptt);
    if (!std::isfinite(grad.loss) || !grad.w_in.allFinite() || !grad.w_rec.allFinite()) {
      throw NumericalError("training diverged at epoch " + std::to_string(epoch));
    }
    record.loss.push_back(grad.loss);
    if (train_in) {
      MatrixXd g = grad.w_in.cwiseProduct(f_in);
      m_in.update(params.w_in, g, adam, epoch + 1);
    }
    if (train_rec) {
      MatrixXd g = grad.w_rec.cwiseProduct(f_rec);
      m_rec.update(params.w_rec, g, adam, epoch + 1);
    }
    if (cfg.weight_limit > 0.0) {
      params.w_in = params.w_in.cwiseMax(-cfg.weight_limit).cwiseMin(cfg.weight_limit);
      params.w_rec = params.w_rec.cwiseMax(-cfg.weight_limit).cwiseMin(cfg.weight_limit);
    }
    if (cfg.recurrent_limit > 0.0)
      params.w_rec = params.w_rec.cwiseMax(-cfg.recurrent_limit).cwiseMin(cfg.recurrent_limit);
    if (on_epoch && !on_epoch(epoch, grad.loss, params)) break;
  }
  return record;
}

Network init_network(Index n_inputs, Index n_neurons, const SimParams& params, std::uint64_t seed,
                     const WeightInit& init) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> w_in(init.in_mean, init.in_std);
  std::normal_distribution<double> w_rec(0.0, init.rec_std);
  MatrixXd in(n_inputs, n_neurons), rec(n_neurons, n_neurons);
  for (Index j = 0; j < n_neurons; ++j) {
    for (Index i = 0; i < n_inputs; ++i) in(i, j) = w_in(rng);
  }
  for (Index j = 0; j < n_neurons; ++j) {
    for (Index i = 0; i < n_neurons; ++i) rec(i, j) = w_rec(rng);
  }
  return make_network(std::move(in), std::move(rec), params);
}

}  // namespace mixsnn

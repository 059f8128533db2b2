#include "mixsnn/mismatch.hpp"

#include <cmath>
#include <random>

namespace mixsnn {

namespace {

double sign(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

}  // namespace

std::set<std::string> MismatchSpec::default_targets() {
  std::set<std::string> t;
  for (Current c : hardware_currents()) {
    if (c == Current::Ireset) continue;
    t.emplace(current_name(c));
  }
  t.emplace("w_in");
  t.emplace("w_rec");
  return t;
}

void MismatchSpec::validate() const {
  if (!(sigma_rel >= 0.0 && sigma_rel < 1.0)) throw ParameterError("sigma_rel must be in [0, 1)");
  if (refresh_period < 1) throw ParameterError("refresh_period must be >= 1");
  for (const auto& name : targets) {
    if (name != "w_in" && name != "w_rec" && !current_from_name(name)) {
      throw ParameterError("unknown mismatch target: " + name);
    }
  }
}

MismatchDraw draw_mismatch(const Network& nominal, const MismatchSpec& spec,
                           std::uint64_t draw_index) {
  spec.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(draw_index),
                    static_cast<std::uint32_t>(draw_index >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);

  MismatchDraw draw;
  std::vector<Current> targeted;
  for (Current c : all_currents()) {
    if (spec.targets.contains(std::string(current_name(c)))) targeted.push_back(c);
  }
  draw.current_factor.resize(nominal.params.size());
  for (auto& factors : draw.current_factor) {
    factors.fill(1.0);
    for (Current c : targeted) factors[static_cast<std::size_t>(c)] = 1.0 + spec.sigma_rel * normal(rng);
  }
  auto weight_factors = [&](const MatrixXd& w, bool on) {
    MatrixXd f = MatrixXd::Ones(w.rows(), w.cols());
    if (!on) return f;
    for (Index j = 0; j < w.cols(); ++j) {
      for (Index i = 0; i < w.rows(); ++i) f(i, j) = std::max(1.0 + spec.sigma_rel * normal(rng), 0.0);
    }
    return f;
  };
  draw.w_in_factor = weight_factors(nominal.w_in, spec.targets.contains("w_in"));
  draw.w_rec_factor = weight_factors(nominal.w_rec, spec.targets.contains("w_rec"));
  return draw;
}

Network apply_mismatch(const Network& nominal, const MismatchDraw& draw) {
  if (draw.current_factor.size() != nominal.params.size() ||
      draw.w_in_factor.rows() != nominal.w_in.rows() ||
      draw.w_in_factor.cols() != nominal.w_in.cols() ||
      draw.w_rec_factor.rows() != nominal.w_rec.rows() ||
      draw.w_rec_factor.cols() != nominal.w_rec.cols()) {
    throw DimensionError("mismatch draw does not match the network shape");
  }
  Network out = nominal;
  for (std::size_t n = 0; n < out.params.size(); ++n) {
    for (Current c : all_currents()) {
      double f = draw.current_factor[n][static_cast<std::size_t>(c)];
      if (f != 1.0) out.params[n][c] = std::max(nominal.params[n][c] * f, kCurrentFloor);
    }
  }
  out.w_in = nominal.w_in.cwiseProduct(draw.w_in_factor);
  out.w_rec = nominal.w_rec.cwiseProduct(draw.w_rec_factor);
  return out;
}

Network adversarial_perturb(const Network& params, const NetworkGradient& grad, double step_size,
                            const std::set<std::string>& targets) {
  if (grad.w_in.rows() != params.w_in.rows() || grad.w_in.cols() != params.w_in.cols() ||
      grad.w_rec.rows() != params.w_rec.rows() || grad.w_rec.cols() != params.w_rec.cols()) {
    throw DimensionError("gradient shape does not match parameters");
  }
  if (!grad.currents.empty() && grad.currents.size() != params.params.size()) {
    throw DimensionError("current gradient must have one entry per neuron");
  }
  Network out = params;
  auto ascend = [&](double p, double g) { return p + step_size * std::abs(p) * sign(g); };
  if (targets.contains("w_in")) out.w_in = params.w_in.binaryExpr(grad.w_in, ascend);
  if (targets.contains("w_rec")) out.w_rec = params.w_rec.binaryExpr(grad.w_rec, ascend);
  if (!grad.currents.empty()) {
    for (std::size_t n = 0; n < out.params.size(); ++n) {
      for (Current c : all_currents()) {
        if (!targets.contains(std::string(current_name(c)))) continue;
        double g = grad.currents[n][static_cast<std::size_t>(c)];
        out.params[n][c] = std::max(ascend(params.params[n][c], g), kCurrentFloor);
      }
    }
  }
  return out;
}

}  // namespace mixsnn

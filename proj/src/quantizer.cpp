#include "mixsnn/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>

namespace mixsnn {

namespace {

double softplus(double z) { return z > 30.0 ? z : std::log1p(std::exp(z)); }
double softplus_inverse(double c) { return c > 30.0 ? c : std::log(std::expm1(c)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Best mask for one magnitude; ties go to the smaller mask.
std::uint8_t best_mask(const std::array<double, kMaskCount>& sums, double target) {
  std::uint8_t best = 0;
  double best_err = (sums[0] - target) * (sums[0] - target);
  for (unsigned m = 1; m < kMaskCount; ++m) {
    const double e = (sums[m] - target) * (sums[m] - target);
    if (e < best_err) {
      best_err = e;
      best = static_cast<std::uint8_t>(m);
    }
  }
  return best;
}

std::array<double, kMaskCount> all_sums(const BaseWeights& base) {
  std::array<double, kMaskCount> s{};
  for (unsigned m = 0; m < kMaskCount; ++m) s[m] = subset_sum(base, m);
  return s;
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double loss_of(const BaseWeights& base, const VectorXd& x) {
  const auto sums = all_sums(base);
  double total = 0.0;
  for (Index e = 0; e < x.size(); ++e) {
    const double d = sums[best_mask(sums, x(e))] - x(e);
    total += d * d;
  }
  return total / static_cast<double>(x.size());
}

/// Per-mask sufficient statistics of the magnitudes assigned to each mask.
struct MaskStats {
  std::array<double, kMaskCount> count{};
  std::array<double, kMaskCount> sum{};
  double sum_sq = 0.0;

  void add(unsigned m, double v, double w = 1.0) {
    count[m] += w;
    sum[m] += w * v;
  }
};

MaskStats stats_of(const std::vector<unsigned>& masks, const VectorXd& x) {
  MaskStats s;
  for (Index e = 0; e < x.size(); ++e) s.add(masks[static_cast<std::size_t>(e)], x(e));
  s.sum_sq = x.squaredNorm();
  return s;
}

/// Squared error of the fixed assignment under `base`.
double assigned_error(const MaskStats& s, const BaseWeights& base) {
  double total = s.sum_sq;
  for (unsigned m = 0; m < kMaskCount; ++m) {
    if (s.count[m] == 0.0) continue;
    const double b = subset_sum(base, m);
    total += s.count[m] * b * b - 2.0 * b * s.sum[m];
  }
  return total;
}

/// Least-squares base weights for a fixed assignment. Unused bases keep
/// their value; nullopt when a used base would turn non-positive.
std::optional<BaseWeights> solve_bases(const MaskStats& s, const BaseWeights& base) {
  Eigen::Matrix4d g = Eigen::Matrix4d::Zero();
  Eigen::Vector4d rhs = Eigen::Vector4d::Zero();
  for (unsigned m = 0; m < kMaskCount; ++m) {
    if (s.count[m] == 0.0) continue;
    for (int i = 0; i < 4; ++i) {
      if (!((m >> i) & 1u)) continue;
      rhs(i) += s.sum[m];
      for (int j = 0; j < 4; ++j) {
        if ((m >> j) & 1u) g(i, j) += s.count[m];
      }
    }
  }
  std::vector<int> used;
  for (int k = 0; k < 4; ++k) {
    if (g(k, k) > 0.0) used.push_back(k);
  }
  if (used.empty()) return base;
  const auto nu = static_cast<Index>(used.size());
  MatrixXd gs(nu, nu);
  VectorXd rs(nu);
  for (Index a = 0; a < nu; ++a) {
    rs(a) = rhs(used[static_cast<std::size_t>(a)]);
    for (Index b = 0; b < nu; ++b) gs(a, b) = g(used[static_cast<std::size_t>(a)], used[static_cast<std::size_t>(b)]);
  }
  const VectorXd b = gs.colPivHouseholderQr().solve(rs);
  if (!b.allFinite() || (b.array() <= 0.0).any()) return std::nullopt;
  BaseWeights out = base;
  for (Index a = 0; a < nu; ++a) out[static_cast<std::size_t>(used[static_cast<std::size_t>(a)])] = b(a);
  return out;
}

std::vector<unsigned> assign(const BaseWeights& base, const VectorXd& x) {
  const auto sums = all_sums(base);
  std::vector<unsigned> masks(static_cast<std::size_t>(x.size()));
  for (Index e = 0; e < x.size(); ++e) masks[static_cast<std::size_t>(e)] = best_mask(sums, x(e));
  return masks;
}

/// Alternates exact assignment and least squares while the loss falls.
BaseWeights polish(BaseWeights base, const VectorXd& x, double& current) {
  for (int it = 0; it < 50; ++it) {
    auto next = solve_bases(stats_of(assign(base, x), x), base);
    if (!next) break;
    const double l = loss_of(*next, x);
    if (!(l < current)) break;
    base = *next;
    current = l;
  }
  return base;
}

/// Descent over assignment moves: relabel every entry of one mask, or a
/// single entry when the vector is small, then re-solve the bases.
BaseWeights descend(BaseWeights base, const VectorXd& x) {
  constexpr Index kSingleMoveLimit = 4096;
  const auto n = static_cast<double>(x.size());
  double current = loss_of(base, x);
  base = polish(base, x, current);
  for (int round = 0; round < 200; ++round) {
    const auto masks = assign(base, x);
    const MaskStats s = stats_of(masks, x);
    std::optional<BaseWeights> found;
    auto consider = [&](const MaskStats& moved) {
      auto b = solve_bases(moved, base);
      if (b && assigned_error(moved, *b) / n < current * (1.0 - 1e-12)) found = b;
    };
    for (unsigned from = 0; from < kMaskCount && !found; ++from) {
      if (s.count[from] == 0.0) continue;
      for (unsigned to = 0; to < kMaskCount && !found; ++to) {
        if (to == from) continue;
        MaskStats moved = s;
        moved.add(to, s.sum[from] / s.count[from], s.count[from]);
        moved.count[from] = 0.0;
        moved.sum[from] = 0.0;
        consider(moved);
      }
    }
    if (x.size() <= kSingleMoveLimit) {
      for (Index e = 0; e < x.size() && !found; ++e) {
        const unsigned from = masks[static_cast<std::size_t>(e)];
        for (unsigned to = 0; to < kMaskCount && !found; ++to) {
          if (to == from) continue;
          MaskStats moved = s;
          moved.add(from, x(e), -1.0);
          moved.add(to, x(e));
          consider(moved);
        }
      }
    }
    if (!found) break;
    const double l = loss_of(*found, x);
    if (!(l < current)) break;
    base = *found;
    current = l;
    base = polish(base, x, current);
  }
  return base;
}

/// One autoencoder run on a vector of magnitudes in [0, 1] starting from
/// the given base weights; returns the refined base weights.
BaseWeights fit_bases(const VectorXd& x, const BaseWeights& ladder, const AutoencoderConfig& cfg) {
  const Index n = x.size();

  // Encoder: code = softplus(E x + b). Decoder: mask = sigmoid(L).
  MatrixXd enc = MatrixXd::Zero(4, n);
  VectorXd bias(4);
  for (int k = 0; k < 4; ++k) bias(k) = softplus_inverse(ladder[static_cast<std::size_t>(k)]);
  MatrixXd logits(n, 4);
  {
    const auto sums = all_sums(ladder);
    for (Index e = 0; e < n; ++e) {
      const unsigned m = best_mask(sums, x(e));
      for (int k = 0; k < 4; ++k) logits(e, k) = ((m >> k) & 1u) ? 2.0 : -2.0;
    }
  }

  const AdamConfig adam{cfg.learning_rate, 0.9, 0.999, 1e-8};
  AdamMoments<double> m_enc, m_bias, m_logits;
  VectorXd z(4), code(4), r(n), dr(n), dcode(4), dz(4);
  MatrixXd mask(n, 4), dlogits(n, 4);
  for (int step = 1; step <= cfg.steps; ++step) {
    z = enc * x + bias;
    for (int k = 0; k < 4; ++k) code(k) = softplus(z(k));
    mask = logits.unaryExpr([](double v) { return sigmoid(v); });
    r = mask * code;
    dr = (2.0 / static_cast<double>(n)) * (r - x);
    dlogits = (dr * code.transpose()).cwiseProduct(mask.cwiseProduct((1.0 - mask.array()).matrix()));
    dcode = mask.transpose() * dr;
    for (int k = 0; k < 4; ++k) dz(k) = dcode(k) * sigmoid(z(k));
    MatrixXd denc = dz * x.transpose();
    m_enc.update(enc, denc, adam, step);
    m_bias.update(bias, dz, adam, step);
    m_logits.update(logits, dlogits, adam, step);
  }
  z = enc * x + bias;
  BaseWeights base;
  for (int k = 0; k < 4; ++k) base[static_cast<std::size_t>(k)] = std::max(softplus(z(k)), 1e-12);

  // Hardening the relaxed masks at 0.5 is superseded by the exact per-entry
  // assignment, followed by a descent over assignment moves.
  base = descend(base, x);
  std::sort(base.begin(), base.end());
  return base;
}

/// Geometric ladder over [p25, p99] of the non-zero magnitudes, or nullopt
/// when everything is zero.
std::optional<BaseWeights> initial_ladder(const VectorXd& x) {
  std::vector<double> nz;
  for (Index e = 0; e < x.size(); ++e) {
    if (x(e) > 0.0) nz.push_back(x(e));
  }
  if (nz.empty()) return std::nullopt;
  const double lo = percentile(nz, 0.25);
  const double hi = percentile(nz, 0.99);
  const double ratio = std::pow(hi / lo, 1.0 / 3.0);
  BaseWeights ladder;
  for (int k = 0; k < 4; ++k) ladder[static_cast<std::size_t>(k)] = lo * std::pow(ratio, k);
  return ladder;
}

/// Best of `restarts` runs: the first starts from the geometric ladder, the
/// others alternate between sorted uniform draws over the magnitude range
/// and four magnitudes picked from the data.
BaseWeights best_bases(const VectorXd& x, const AutoencoderConfig& cfg) {
  auto ladder = initial_ladder(x);
  if (!ladder) return {0.125, 0.25, 0.5, 1.0};
  const double lo = x.maxCoeff() > 0.0 ? (x.array() > 0.0).select(x.array(), x.maxCoeff()).minCoeff() : 0.0;
  const double hi = x.maxCoeff();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u(lo, hi);
  BaseWeights best = fit_bases(x, *ladder, cfg);
  double best_loss = loss_of(best, x);
  for (int r = 1; r < cfg.restarts; ++r) {
    BaseWeights start;
    if (r % 2 == 1) {
      for (double& b : start) b = std::max(u(rng), 1e-6);
    } else {
      std::uniform_int_distribution<Index> pick(0, x.size() - 1);
      for (double& b : start) b = std::max(x(pick(rng)), 1e-6);
    }
    std::sort(start.begin(), start.end());
    BaseWeights cand = fit_bases(x, start, cfg);
    const double l = loss_of(cand, x);
    if (l < best_loss) {
      best = cand;
      best_loss = l;
    }
  }
  return best;
}

}  // namespace

void QuantSpec::validate() const {
  for (double b : base_weights) {
    if (!(b > 0.0) || !std::isfinite(b)) throw ValidationError("base weights must be positive and finite");
  }
  if (!std::is_sorted(base_weights.begin(), base_weights.end())) {
    throw ValidationError("base weights must be in ascending order");
  }
  if (mask.rows() != sign.rows() || mask.cols() != sign.cols()) {
    throw DimensionError("mask and sign shapes differ");
  }
  for (Index j = 0; j < mask.cols(); ++j) {
    for (Index i = 0; i < mask.rows(); ++i) {
      if (mask(i, j) >= kMaskCount) throw ValidationError("mask entries must lie in [0, 15]");
      if (sign(i, j) < -1 || sign(i, j) > 1) throw ValidationError("sign entries must lie in {-1, 0, 1}");
      if (sign(i, j) == 0 && mask(i, j) != 0) throw ValidationError("mask must be 0 where sign is 0");
    }
  }
}

MatrixXd reconstruct(const QuantSpec& q) {
  q.validate();
  const auto sums = all_sums(q.base_weights);
  return MatrixXd::NullaryExpr(q.rows(), q.cols(), [&](Index i, Index j) {
    return static_cast<double>(q.sign(i, j)) * sums[q.mask(i, j)];
  });
}

double reconstruction_loss(const QuantSpec& q, const MatrixXd& w) {
  if (w.rows() != q.rows() || w.cols() != q.cols()) {
    throw DimensionError("weight matrix is " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()) +
                         ", quantized spec is " + std::to_string(q.rows()) + "x" + std::to_string(q.cols()));
  }
  if (w.size() == 0) return 0.0;
  return (reconstruct(q).cwiseAbs() - w.cwiseAbs()).squaredNorm() / static_cast<double>(w.size());
}

MaskMatrix refine_masks(const BaseWeights& base, const MatrixXd& w) {
  const auto sums = all_sums(base);
  return MaskMatrix::NullaryExpr(w.rows(), w.cols(),
                                 [&](Index i, Index j) { return best_mask(sums, std::abs(w(i, j))); });
}

SignMatrix sign_of(const MatrixXd& w) {
  return w.unaryExpr([](double v) { return static_cast<std::int8_t>((v > 0.0) - (v < 0.0)); });
}

void AutoencoderConfig::validate() const {
  if (steps < 0) throw ParameterError("autoencoder steps must be >= 0");
  if (restarts < 1) throw ParameterError("autoencoder restarts must be >= 1");
  if (!(learning_rate > 0.0)) throw ParameterError("autoencoder learning rate must be positive");
}

std::vector<QuantSpec> autoencoder_quantize_shared(const std::vector<MatrixXd>& ws,
                                                   const AutoencoderConfig& cfg, double* loss) {
  cfg.validate();
  Index total = 0;
  double scale = 0.0;
  for (const auto& w : ws) {
    if (!w.allFinite()) throw ValidationError("weights must be finite");
    total += w.size();
    if (w.size() > 0) scale = std::max(scale, w.cwiseAbs().maxCoeff());
  }
  VectorXd x(total);
  Index at = 0;
  for (const auto& w : ws) {
    for (Index j = 0; j < w.cols(); ++j) {
      for (Index i = 0; i < w.rows(); ++i) x(at++) = scale > 0.0 ? std::abs(w(i, j)) / scale : 0.0;
    }
  }
  BaseWeights base = best_bases(x, cfg);
  const double s = scale > 0.0 ? scale : 1.0;
  for (double& b : base) b *= s;

  std::vector<QuantSpec> out;
  double sq = 0.0;
  for (const auto& w : ws) {
    QuantSpec q;
    q.base_weights = base;
    q.mask = refine_masks(base, w);
    q.sign = sign_of(w);
    for (Index j = 0; j < w.cols(); ++j) {
      for (Index i = 0; i < w.rows(); ++i) {
        if (q.sign(i, j) == 0) q.mask(i, j) = 0;
      }
    }
    if (w.size() > 0) sq += reconstruction_loss(q, w) * static_cast<double>(w.size());
    out.push_back(std::move(q));
  }
  if (loss) *loss = total > 0 ? sq / static_cast<double>(total) : 0.0;
  return out;
}

QuantResult autoencoder_quantize(const MatrixXd& w, const AutoencoderConfig& cfg) {
  QuantResult r;
  auto specs = autoencoder_quantize_shared({w}, cfg, &r.loss);
  r.spec = std::move(specs.front());
  return r;
}

}  // namespace mixsnn

#ifndef ECC_GRAD_CHECK_HPP_
#define ECC_GRAD_CHECK_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecc/center_bank.hpp"
#include "ecc/linalg.hpp"
#include "ecc/loss.hpp"
#include "ecc/mlp.hpp"

// Central finite differences against re-derived loss formulas evaluated in
// long double. The references below share no code with loss.hpp or the
// model's forward pass, so a mistake in either route shows up as a mismatch.

namespace ecc::gradcheck {

using Real = long double;

enum class Component { Mcc, Clg, Ce, Network };
inline constexpr std::array kComponents{Component::Mcc, Component::Clg, Component::Ce, Component::Network};

inline std::string_view to_string(Component c) {
  switch (c) {
    case Component::Mcc: return "mcc";
    case Component::Clg: return "clg";
    case Component::Ce: return "ce";
    case Component::Network: return "network";
  }
  return "?";
}

/// Elementwise comparison: relative error |a − n| / max(|a|, |n|), except
/// that pairs with max(|a|, |n|) < abs_floor must agree to abs_floor.
struct Comparison {
  double max_relative = 0.0;
  double max_small_abs = 0.0;
  bool passed(double tolerance, double abs_floor) const {
    return max_relative <= tolerance && max_small_abs <= abs_floor;
  }
};

inline Comparison compare(std::span<const double> analytic, std::span<const Real> numeric, double abs_floor = 1e-8) {
  Comparison c;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i];
    const double n = static_cast<double>(numeric[i]);
    const double scale = std::max(std::abs(a), std::abs(n));
    const double diff = std::abs(a - n);
    if (scale < abs_floor) {
      c.max_small_abs = std::max(c.max_small_abs, diff);
    } else {
      c.max_relative = std::max(c.max_relative, diff / scale);
    }
  }
  return c;
}

namespace reference {

inline Real dot(const Real* a, const Real* b, std::size_t n) {
  Real s = 0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline Real cosine(const Real* a, const Real* b, std::size_t n) {
  return dot(a, b, n) / (std::sqrt(dot(a, a, n)) * std::sqrt(dot(b, b, n)));
}

inline std::vector<Real> widen(std::span<const double> v) { return {v.begin(), v.end()}; }

inline std::vector<Real> softmax(const Real* z, std::size_t n) {
  Real m = z[0];
  for (std::size_t i = 1; i < n; ++i) m = std::max(m, z[i]);
  std::vector<Real> p(n);
  Real s = 0;
  for (std::size_t i = 0; i < n; ++i) s += (p[i] = std::exp(z[i] - m));
  for (auto& v : p) v /= s;
  return p;
}

/// Σ_k 1 − cos(x_k, F_y) + s·cos(x_k, F_sim), x as an M×D row-major block.
inline Real mcc(const std::vector<Real>& x, std::size_t d, const std::vector<std::size_t>& labels,
                const CenterBank& bank, const SimilarityMatrix& sim) {
  Real total = 0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const std::size_t y = labels[k];
    const std::size_t w = sim.most_similar[y];
    const auto ft = widen(bank.feature(y));
    const auto fs = widen(bank.feature(w));
    total += 1 - cosine(&x[k * d], ft.data(), d) + static_cast<Real>(sim.s(y, w)) * cosine(&x[k * d], fs.data(), d);
  }
  return total;
}

/// Σ_k Σ_n p_n log(p_n / q_n) with q floored at 1e-12.
inline Real clg(const std::vector<Real>& z, std::size_t n, const std::vector<std::size_t>& labels,
                const CenterBank& bank) {
  Real total = 0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const auto p = softmax(&z[k * n], n);
    const auto lq = widen(bank.logits(labels[k]));
    const auto q = softmax(lq.data(), n);
    for (std::size_t j = 0; j < n; ++j) {
      if (p[j] > 0) total += p[j] * std::log(p[j] / std::max(q[j], static_cast<Real>(kProbabilityFloor)));
    }
  }
  return total;
}

/// −(1/M) Σ_k log p_k[y_k]
inline Real ce(const std::vector<Real>& z, std::size_t n, const std::vector<std::size_t>& labels) {
  Real total = 0;
  for (std::size_t k = 0; k < labels.size(); ++k) total -= std::log(softmax(&z[k * n], n)[labels[k]]);
  return total / static_cast<Real>(labels.size());
}

struct Network {
  std::vector<std::size_t> dims;
  std::vector<std::vector<Real>> weights;  // out×in row-major
  std::vector<std::vector<Real>> biases;
  std::vector<Real> shift;
  std::vector<Real> scale;
};

inline Network widen(const MlpModel& model) {
  Network net{model.layer_dims(), {}, {}, widen(model.input_shift()), widen(model.input_scale())};
  for (const auto& p : model.params()) {
    net.weights.push_back(widen(p.weights.data()));
    net.biases.emplace_back(p.bias.begin(), p.bias.end());
  }
  return net;
}

/// Returns (features, logits) and the smallest |pre-activation| seen on a
/// ReLU layer.
inline std::pair<std::vector<Real>, std::vector<Real>> forward(const Network& net, const DenseMatrix& inputs,
                                                                 Real* min_relu_margin = nullptr) {
  const std::size_t m = inputs.rows();
  const std::size_t layers = net.weights.size();
  std::vector<Real> act = widen(inputs.data());
  for (std::size_t i = 0; i < act.size(); ++i) {
    const std::size_t c = i % net.dims[0];
    act[i] = (act[i] - net.shift[c]) / net.scale[c];
  }
  std::vector<Real> features;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = net.dims[l];
    const std::size_t out = net.dims[l + 1];
    std::vector<Real> next(m * out);
    for (std::size_t k = 0; k < m; ++k) {
      for (std::size_t o = 0; o < out; ++o) {
        Real v = net.biases[l][o] + dot(&net.weights[l][o * in], &act[k * in], in);
        if (l + 2 < layers) {
          if (min_relu_margin) *min_relu_margin = std::min(*min_relu_margin, std::abs(v));
          v = std::max<Real>(v, 0);
        }
        next[k * out + o] = v;
      }
    }
    act = std::move(next);
    if (l + 2 == layers) features = act;
  }
  return {features, act};
}

inline Real final_loss(const Network& net, const DenseMatrix& inputs, const std::vector<std::size_t>& labels,
                       const CenterBank& bank, const SimilarityMatrix& sim, LossWeights w) {
  const auto [features, logits] = forward(net, inputs);
  const std::size_t d = net.dims[net.dims.size() - 2];
  const std::size_t n = net.dims.back();
  Real total = ce(logits, n, labels);
  if (w.mcc > 0) total += static_cast<Real>(w.mcc) * mcc(features, d, labels, bank, sim);
  if (w.clg > 0) total += static_cast<Real>(w.clg) * clg(logits, n, labels, bank);
  return total;
}

}  // namespace reference

/// Central differences of f over every entry of x (in place, restored).
template <typename F>
std::vector<Real> central_differences(std::vector<Real>& x, Real h, F&& f) {
  std::vector<Real> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Real saved = x[i];
    x[i] = saved + h;
    const Real up = f();
    x[i] = saved - h;
    const Real down = f();
    x[i] = saved;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

/// Hook to tamper with an analytic gradient before it is compared; used as a
/// negative control.
using Corruption = std::function<void(Component, std::span<double>)>;

struct Options {
  std::uint64_t seed = 20240601;
  std::size_t trials = 100;
  double loss_step = 1e-6;
  double network_step = 1e-5;
  double loss_tolerance = 1e-6;
  double network_tolerance = 1e-4;
  double abs_floor = 1e-8;
  Corruption corrupt;
};

struct ComponentResult {
  Component component;
  double max_relative = 0.0;
  double max_small_abs = 0.0;
  std::uint64_t worst_seed = 0;
  double worst_score = -1.0;
  bool passed = true;
};

struct Report {
  std::vector<ComponentResult> components;
  bool passed() const {
    return std::all_of(components.begin(), components.end(), [](const auto& c) { return c.passed; });
  }
};

namespace detail {

inline std::uint64_t trial_seed(std::uint64_t seed, std::size_t trial) {
  // splitmix64 step keeps neighbouring trials decorrelated.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (trial + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::size_t uniform_size(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline DenseMatrix normal_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double sigma) {
  std::normal_distribution<double> normal(0.0, sigma);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = normal(rng);
  return DenseMatrix(rows, cols, std::move(v));
}

/// A bank whose rows have absorbed a few random samples.
inline CenterBank random_bank(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  CenterBank bank = CenterBank::random(n, d, rng());
  const DenseMatrix f = normal_matrix(rng, 3 * n, d, 1.0);
  const DenseMatrix z = normal_matrix(rng, 3 * n, n, 2.0);
  for (std::size_t r = 0; r < 3 * n; ++r) bank.update(r % n, f.row(r), z.row(r));
  return bank;
}

inline std::vector<std::size_t> random_labels(std::mt19937_64& rng, std::size_t m, std::size_t n) {
  std::vector<std::size_t> labels(m);
  for (auto& y : labels) y = uniform_size(rng, 0, n - 1);
  return labels;
}

inline void record(ComponentResult& result, const Comparison& c, std::uint64_t seed, double tolerance,
                   double abs_floor) {
  // Score on the relative scale so small-element failures rank too.
  const double score = std::max(c.max_relative / tolerance, c.max_small_abs / abs_floor);
  if (score > result.worst_score) {
    result.worst_score = score;
    result.worst_seed = seed;
  }
  result.max_relative = std::max(result.max_relative, c.max_relative);
  result.max_small_abs = std::max(result.max_small_abs, c.max_small_abs);
  if (!c.passed(tolerance, abs_floor)) result.passed = false;
}

}  // namespace detail

/// Loss-level checks (MCC w.r.t. features; CLG and CE w.r.t. logits) on
/// random (M, D, N) ∈ [1, 8]×[2, 16]×[2, 10], then a full-network check of
/// every parameter under the combined loss on a tiny ReLU MLP.
inline Report run(const Options& opt) {
  Report report;
  for (Component c : kComponents) report.components.push_back(ComponentResult{c});
  auto& mcc_result = report.components[0];
  auto& clg_result = report.components[1];
  auto& ce_result = report.components[2];
  auto& net_result = report.components[3];
  const auto h = static_cast<Real>(opt.loss_step);

  for (std::size_t t = 0; t < opt.trials; ++t) {
    const std::uint64_t seed = detail::trial_seed(opt.seed, t);
    std::mt19937_64 rng(seed);
    const std::size_t m = detail::uniform_size(rng, 1, 8);
    const std::size_t d = detail::uniform_size(rng, 2, 16);
    const std::size_t n = detail::uniform_size(rng, 2, 10);
    const CenterBank bank = detail::random_bank(rng, n, d);
    const SimilarityMatrix sim = build_similarity(bank);
    Batch batch{detail::normal_matrix(rng, m, d, 1.0), detail::normal_matrix(rng, m, n, 2.0),
                detail::random_labels(rng, m, n)};

    auto apply_corruption = [&](Component c, DenseMatrix& g) {
      if (opt.corrupt) opt.corrupt(c, g.data());
    };

    LossTerm mcc = mcc_loss(batch, bank, sim);
    apply_corruption(Component::Mcc, mcc.grad);
    auto x = reference::widen(batch.features.data());
    const auto mcc_fd =
        central_differences(x, h, [&] { return reference::mcc(x, d, batch.labels, bank, sim); });
    detail::record(mcc_result, compare(mcc.grad.data(), mcc_fd, opt.abs_floor), seed, opt.loss_tolerance,
                   opt.abs_floor);

    auto z = reference::widen(batch.logits.data());
    LossTerm clg = clg_loss(batch, bank);
    apply_corruption(Component::Clg, clg.grad);
    const auto clg_fd = central_differences(z, h, [&] { return reference::clg(z, n, batch.labels, bank); });
    detail::record(clg_result, compare(clg.grad.data(), clg_fd, opt.abs_floor), seed, opt.loss_tolerance,
                   opt.abs_floor);

    LossTerm ce = ce_loss(batch);
    apply_corruption(Component::Ce, ce.grad);
    const auto ce_fd = central_differences(z, h, [&] { return reference::ce(z, n, batch.labels); });
    detail::record(ce_result, compare(ce.grad.data(), ce_fd, opt.abs_floor), seed, opt.loss_tolerance,
                   opt.abs_floor);

    // Through-network check, dims <= 6 and M <= 4.
    const std::size_t in = detail::uniform_size(rng, 2, 6);
    const std::size_t hidden = detail::uniform_size(rng, 2, 6);
    const std::size_t fd_dim = detail::uniform_size(rng, 2, 6);
    const std::size_t classes = detail::uniform_size(rng, 2, 6);
    const std::size_t batch_size = detail::uniform_size(rng, 1, 4);
    MlpModel model({in, hidden, fd_dim, classes}, rng());
    // Nonzero biases keep the feature layer away from the all-dead origin.
    for (auto& layer : model.params()) {
      for (double& b : layer.bias) b = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
    }
    const CenterBank net_bank = detail::random_bank(rng, classes, fd_dim);
    const SimilarityMatrix net_sim = build_similarity(net_bank);
    const LossWeights weights{std::uniform_real_distribution<double>(0.1, 2.0)(rng),
                              std::uniform_real_distribution<double>(0.1, 2.0)(rng)};
    const auto labels = detail::random_labels(rng, batch_size, classes);
    auto net = reference::widen(model);

    // Resample inputs until no ReLU sits within 1e-3 of its kink, where a
    // central difference straddles the nondifferentiable point.
    DenseMatrix inputs = detail::normal_matrix(rng, batch_size, in, 1.0);
    for (int attempt = 0; attempt < 100; ++attempt) {
      Real margin = 1;
      reference::forward(net, inputs, &margin);
      if (margin > 1e-3) break;
      inputs = detail::normal_matrix(rng, batch_size, in, 1.0);
    }

    const auto pass = model.forward(inputs);
    const Batch net_batch{pass.features(), pass.logits(), labels};
    const LossResult loss = final_loss(net_batch, net_bank, net_sim, weights);
    ParamSet grads = model.backward(pass, loss.grad_features, loss.grad_logits);

    std::vector<double> analytic;
    for (const auto& g : grads) {
      analytic.insert(analytic.end(), g.weights.data().begin(), g.weights.data().end());
      analytic.insert(analytic.end(), g.bias.begin(), g.bias.end());
    }
    if (opt.corrupt) opt.corrupt(Component::Network, analytic);

    std::vector<Real> numeric;
    const auto hn = static_cast<Real>(opt.network_step);
    auto loss_fn = [&] { return reference::final_loss(net, inputs, labels, net_bank, net_sim, weights); };
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      const auto gw = central_differences(net.weights[l], hn, loss_fn);
      numeric.insert(numeric.end(), gw.begin(), gw.end());
      const auto gb = central_differences(net.biases[l], hn, loss_fn);
      numeric.insert(numeric.end(), gb.begin(), gb.end());
    }
    detail::record(net_result, compare(analytic, numeric, opt.abs_floor), seed, opt.network_tolerance,
                   opt.abs_floor);
  }
  return report;
}

}  // namespace ecc::gradcheck

#endif  // ECC_GRAD_CHECK_HPP_

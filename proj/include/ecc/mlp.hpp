#ifndef ECC_MLP_HPP_
#define ECC_MLP_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ecc/error.hpp"
#include "ecc/linalg.hpp"
#include "ecc/parallel.hpp"

namespace ecc {

/// Affine map y = W x + b with W stored out×in.
struct LayerParams {
  DenseMatrix weights;
  std::vector<double> bias;

  std::size_t fan_in() const noexcept { return weights.cols(); }
  std::size_t fan_out() const noexcept { return weights.rows(); }
};

using ParamSet = std::vector<LayerParams>;

inline ParamSet zeros_like(const ParamSet& params) {
  ParamSet out;
  out.reserve(params.size());
  for (const auto& layer : params) {
    out.push_back({DenseMatrix(layer.weights.rows(), layer.weights.cols()), std::vector<double>(layer.bias.size(), 0.0)});
  }
  return out;
}

/// Activations of one forward pass. activations[0] is the (transformed) input batch;
/// activations[l + 1] is the output of layer l.
struct ForwardPass {
  std::vector<DenseMatrix> activations;

  const DenseMatrix& features() const { return activations[activations.size() - 2]; }
  const DenseMatrix& logits() const { return activations.back(); }
};

/// Multilayer perceptron [input, hidden..., D, N]. Hidden layers use ReLU;
/// the feature layer (width D) and the logit layer (width N) are affine.
class MlpModel {
 public:
  /// Glorot-uniform weights, zero biases.
  MlpModel(std::vector<std::size_t> layer_dims, std::uint64_t init_seed)
      : layer_dims_(std::move(layer_dims)), init_seed_(init_seed) {
    check_dims(layer_dims_);
    input_shift_.assign(input_dim(), 0.0);
    input_scale_.assign(input_dim(), 1.0);
    std::mt19937_64 rng(init_seed_);
    for (std::size_t l = 0; l + 1 < layer_dims_.size(); ++l) {
      const std::size_t in = layer_dims_[l];
      const std::size_t out = layer_dims_[l + 1];
      const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
      std::uniform_real_distribution<double> uniform(-limit, limit);
      std::vector<double> w(out * in);
      for (double& v : w) v = uniform(rng);
      params_.push_back({DenseMatrix(out, in, std::move(w)), std::vector<double>(out, 0.0)});
    }
  }

  MlpModel(std::vector<std::size_t> layer_dims, std::uint64_t init_seed, ParamSet params)
      : layer_dims_(std::move(layer_dims)), init_seed_(init_seed), params_(std::move(params)) {
    check_dims(layer_dims_);
    input_shift_.assign(input_dim(), 0.0);
    input_scale_.assign(input_dim(), 1.0);
    if (params_.size() + 1 != layer_dims_.size()) throw Error(ErrorKind::ShapeMismatch, "layer count mismatch");
    for (std::size_t l = 0; l < params_.size(); ++l) {
      const auto& p = params_[l];
      if (p.fan_in() != layer_dims_[l] || p.fan_out() != layer_dims_[l + 1] || p.bias.size() != p.fan_out()) {
        throw Error(ErrorKind::ShapeMismatch, "layer " + std::to_string(l) + " parameters do not match layer_dims");
      }
    }
  }

  const std::vector<std::size_t>& layer_dims() const noexcept { return layer_dims_; }
  std::uint64_t init_seed() const noexcept { return init_seed_; }
  std::size_t input_dim() const noexcept { return layer_dims_.front(); }
  std::size_t feature_dim() const noexcept { return layer_dims_[layer_dims_.size() - 2]; }
  std::size_t num_classes() const noexcept { return layer_dims_.back(); }
  std::size_t num_layers() const noexcept { return params_.size(); }

  const ParamSet& params() const noexcept { return params_; }
  ParamSet& params() noexcept { return params_; }

  /// Fixed per-coordinate input transform (x − shift) / scale applied before
  /// the first layer. Identity unless set.
  const std::vector<double>& input_shift() const noexcept { return input_shift_; }
  const std::vector<double>& input_scale() const noexcept { return input_scale_; }

  void set_input_transform(std::vector<double> shift, std::vector<double> scale) {
    if (shift.size() != input_dim() || scale.size() != input_dim()) {
      throw Error(ErrorKind::ShapeMismatch, "input transform width != input_dim");
    }
    for (double s : scale) {
      if (!(s > 0.0) || !std::isfinite(s)) throw Error(ErrorKind::InvalidArgument, "input scale must be > 0");
    }
    if (!all_finite(shift)) throw Error(ErrorKind::NonFinite, "input shift");
    input_shift_ = std::move(shift);
    input_scale_ = std::move(scale);
  }

  /// Z-scores every input coordinate with the mean and standard deviation
  /// of `inputs` (unit scale for constant coordinates).
  void standardize_inputs(const DenseMatrix& inputs) {
    if (inputs.cols() != input_dim()) throw Error(ErrorKind::ShapeMismatch, "standardize_inputs width");
    const std::size_t m = inputs.rows();
    std::vector<double> mean(input_dim(), 0.0), sd(input_dim(), 0.0);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t i = 0; i < input_dim(); ++i) mean[i] += inputs(r, i);
    }
    for (double& v : mean) v /= static_cast<double>(m);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t i = 0; i < input_dim(); ++i) sd[i] += (inputs(r, i) - mean[i]) * (inputs(r, i) - mean[i]);
    }
    for (double& v : sd) {
      v = std::sqrt(v / static_cast<double>(m));
      if (!(v > 0.0)) v = 1.0;
    }
    set_input_transform(std::move(mean), std::move(sd));
  }

  /// Layer l applies ReLU iff it is neither the feature nor the logit layer.
  bool is_relu(std::size_t layer) const noexcept { return layer + 2 < params_.size(); }

  bool all_params_finite() const {
    for (const auto& p : params_) {
      if (!all_finite(p.weights.data()) || !all_finite(p.bias)) return false;
    }
    return true;
  }

  ForwardPass forward(const DenseMatrix& inputs, std::size_t threads = 1) const {
    if (inputs.cols() != input_dim()) {
      throw Error(ErrorKind::ShapeMismatch, "input width " + std::to_string(inputs.cols()) + " != model input_dim " +
                                                std::to_string(input_dim()));
    }
    ForwardPass pass;
    pass.activations.reserve(params_.size() + 1);
    pass.activations.push_back(inputs);
    const std::size_t m = inputs.rows();
    auto& x0 = pass.activations.front();
    for (std::size_t k = 0; k < m; ++k) {
      auto row = x0.row(k);
      for (std::size_t i = 0; i < row.size(); ++i) row[i] = (row[i] - input_shift_[i]) / input_scale_[i];
    }
    for (std::size_t l = 0; l < params_.size(); ++l) {
      const auto& p = params_[l];
      const DenseMatrix& in = pass.activations.back();
      DenseMatrix out(m, p.fan_out());
      const bool relu = is_relu(l);
      parallel_for(m, threads, [&](std::size_t k) {
        const auto x = in.row(k);
        auto y = out.row(k);
        for (std::size_t o = 0; o < p.fan_out(); ++o) {
          double v = p.bias[o] + dot(p.weights.row(o), x);
          y[o] = relu && v < 0.0 ? 0.0 : v;
        }
      });
      if (!all_finite(out.data())) {
        throw Error(ErrorKind::NonFinite, "layer " + std::to_string(l) + " produced a non-finite activation");
      }
      pass.activations.push_back(std::move(out));
    }
    return pass;
  }

  /// Parameter gradients given upstream gradients at the feature layer
  /// (M×D) and at the logit layer (M×N).
  ParamSet backward(const ForwardPass& pass, const DenseMatrix& grad_features, const DenseMatrix& grad_logits) const {
    const std::size_t m = pass.activations.front().rows();
    if (!grad_features.same_shape(pass.features()) || !grad_logits.same_shape(pass.logits())) {
      throw Error(ErrorKind::ShapeMismatch, "upstream gradients do not match the forward pass");
    }
    ParamSet grads = zeros_like(params_);
    DenseMatrix delta = grad_logits;
    for (std::size_t l = params_.size(); l-- > 0;) {
      const auto& p = params_[l];
      const DenseMatrix& in = pass.activations[l];
      auto& g = grads[l];
      for (std::size_t k = 0; k < m; ++k) {
        const auto d = delta.row(k);
        const auto x = in.row(k);
        for (std::size_t o = 0; o < p.fan_out(); ++o) {
          if (d[o] == 0.0) continue;
          auto gw = g.weights.row(o);
          for (std::size_t i = 0; i < p.fan_in(); ++i) gw[i] += d[o] * x[i];
          g.bias[o] += d[o];
        }
      }
      if (l == 0) break;

      DenseMatrix prev(m, p.fan_in());
      for (std::size_t k = 0; k < m; ++k) {
        const auto d = delta.row(k);
        auto dp = prev.row(k);
        for (std::size_t o = 0; o < p.fan_out(); ++o) {
          const auto w = p.weights.row(o);
          for (std::size_t i = 0; i < p.fan_in(); ++i) dp[i] += d[o] * w[i];
        }
      }
      // prev is now the gradient w.r.t. the output of layer l - 1.
      if (l - 1 == params_.size() - 2) {
        auto dst = prev.data();
        auto src = grad_features.data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      }
      if (is_relu(l - 1)) {
        const DenseMatrix& out = pass.activations[l];
        auto dst = prev.data();
        auto act = out.data();
        for (std::size_t i = 0; i < dst.size(); ++i) {
          if (act[i] <= 0.0) dst[i] = 0.0;
        }
      }
      delta = std::move(prev);
    }
    return grads;
  }

 private:
  static void check_dims(const std::vector<std::size_t>& dims) {
    if (dims.size() < 3) throw Error(ErrorKind::InvalidShape, "layer_dims needs at least [input, D, N]");
    for (std::size_t d : dims) {
      if (d == 0) throw Error(ErrorKind::InvalidShape, "layer widths must be >= 1");
    }
    if (dims.back() < 2) throw Error(ErrorKind::InvalidShape, "output width (class count) must be >= 2");
  }

  std::vector<std::size_t> layer_dims_;
  std::uint64_t init_seed_;
  ParamSet params_;
  std::vector<double> input_shift_;
  std::vector<double> input_scale_;
};

/// Heavy-ball SGD: v ← μv − lr·g; θ ← θ + v.
class SgdMomentum {
 public:
  SgdMomentum(const ParamSet& like, double momentum) : momentum_(momentum), velocity_(zeros_like(like)) {}

  void step(ParamSet& params, const ParamSet& grads, double lr) {
    for (std::size_t l = 0; l < params.size(); ++l) {
      apply(params[l].weights.data(), grads[l].weights.data(), velocity_[l].weights.data(), lr);
      apply(params[l].bias, grads[l].bias, velocity_[l].bias, lr);
    }
  }

  const ParamSet& velocity() const noexcept { return velocity_; }

 private:
  void apply(std::span<double> theta, std::span<const double> g, std::span<double> v, double lr) const {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      v[i] = momentum_ * v[i] - lr * g[i];
      theta[i] += v[i];
    }
  }

  double momentum_;
  ParamSet velocity_;
};

}  // namespace ecc

#endif  // ECC_MLP_HPP_

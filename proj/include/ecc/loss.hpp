#ifndef ECC_LOSS_HPP_
#define ECC_LOSS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "ecc/center_bank.hpp"
#include "ecc/error.hpp"
#include "ecc/linalg.hpp"

namespace ecc {

/// Cosine similarities between class-center features, plus for every class
/// the index of its most similar other class.
struct SimilarityMatrix {
  DenseMatrix s;
  std::vector<std::size_t> most_similar;

  std::size_t num_classes() const noexcept { return most_similar.size(); }
  /// s[y][most_similar[y]]
  double nearest_similarity(std::size_t y) const { return s(y, most_similar.at(y)); }
};

/// One mini-batch as seen by the losses: M sample features (M×D), their raw
/// class scores (M×N), and labels.
struct Batch {
  DenseMatrix features;
  DenseMatrix logits;
  std::vector<std::size_t> labels;

  std::size_t size() const noexcept { return labels.size(); }

  void validate(std::size_t num_classes) const {
    if (labels.empty()) throw Error(ErrorKind::InvalidShape, "batch must hold at least one sample");
    if (features.rows() != labels.size() || logits.rows() != labels.size()) {
      throw Error(ErrorKind::ShapeMismatch, "batch features/logits/labels disagree on M");
    }
    if (logits.cols() != num_classes) {
      throw Error(ErrorKind::ShapeMismatch, "batch logits have " + std::to_string(logits.cols()) +
                                                " columns, expected " + std::to_string(num_classes));
    }
    for (std::size_t k = 0; k < labels.size(); ++k) {
      if (labels[k] >= num_classes) {
        throw Error(ErrorKind::IndexOutOfRange, "label " + std::to_string(labels[k]) + " of sample " +
                                                    std::to_string(k) + " >= " + std::to_string(num_classes));
      }
    }
  }
};

/// A scalar loss and its gradient with respect to one batch input (features
/// or logits, depending on the term).
struct LossTerm {
  double value = 0.0;
  DenseMatrix grad;
};

struct LossWeights {
  double mcc = 0.0;  // λ₁
  double clg = 0.0;  // λ₂
};

struct LossResult {
  double ce = 0.0;
  double mcc = 0.0;
  double clg = 0.0;
  double total = 0.0;
  DenseMatrix grad_features;
  DenseMatrix grad_logits;
};

/// s[h][w] = cos(F_h, F_w); most_similar[y] = argmax over w ≠ y, lowest index
/// on ties. Throws DegenerateNorm naming the first class with a near-zero
/// center.
inline SimilarityMatrix build_similarity(const CenterBank& bank) {
  const std::size_t n = bank.num_classes();
  const auto& centers = bank.center_features();
  std::vector<double> norms(n);
  for (std::size_t y = 0; y < n; ++y) {
    norms[y] = norm2(centers.row(y));
    if (norms[y] <= kNormEpsilon) {
      throw Error(ErrorKind::DegenerateNorm, "center feature of class " + std::to_string(y) + " has norm <= 1e-12");
    }
  }

  DenseMatrix s(n, n);
  for (std::size_t h = 0; h < n; ++h) {
    s(h, h) = std::clamp(dot(centers.row(h), centers.row(h)) / (norms[h] * norms[h]), -1.0, 1.0);
    for (std::size_t w = h + 1; w < n; ++w) {
      const double c = std::clamp(dot(centers.row(h), centers.row(w)) / (norms[h] * norms[w]), -1.0, 1.0);
      s(h, w) = c;
      s(w, h) = c;
    }
  }

  std::vector<std::size_t> most_similar(n);
  for (std::size_t y = 0; y < n; ++y) {
    std::size_t best = (y == 0) ? 1 : 0;
    for (std::size_t w = best + 1; w < n; ++w) {
      if (w != y && s(y, w) > s(y, best)) best = w;
    }
    most_similar[y] = best;
  }
  return SimilarityMatrix{std::move(s), std::move(most_similar)};
}

namespace detail {

inline void check_batch_against_bank(const Batch& batch, const CenterBank& bank) {
  batch.validate(bank.num_classes());
  if (batch.features.cols() != bank.feature_dim()) {
    throw Error(ErrorKind::ShapeMismatch, "batch feature width " + std::to_string(batch.features.cols()) +
                                              " != bank feature_dim " + std::to_string(bank.feature_dim()));
  }
}

// log softmax(L_y) with the probability floor applied in log space.
inline std::vector<double> floored_log_soft_label(std::span<const double> center_logits) {
  auto log_q = log_softmax(center_logits);
  const double log_floor = std::log(kProbabilityFloor);
  for (double& v : log_q) v = std::max(v, log_floor);
  return log_q;
}

}  // namespace detail

/// Multiple class-center constraint over a batch (unnormalized sum):
///   Σ_k 1 − cos(X_k, F_{y_k}) + s_{y_k, sim} · cos(X_k, F_{sim})
/// The gradient is with respect to X only; F and s are constants.
inline LossTerm mcc_loss(const Batch& batch, const CenterBank& bank, const SimilarityMatrix& sim) {
  detail::check_batch_against_bank(batch, bank);
  if (sim.num_classes() != bank.num_classes()) {
    throw Error(ErrorKind::ShapeMismatch, "similarity matrix does not match the bank");
  }
  const std::size_t m = batch.size();
  const std::size_t d = bank.feature_dim();
  LossTerm out{0.0, DenseMatrix(m, d)};
  std::vector<double> g_target(d), g_similar(d);
  for (std::size_t k = 0; k < m; ++k) {
    const auto x = batch.features.row(k);
    const double nx = norm2(x);
    if (nx <= kNormEpsilon) {
      throw Error(ErrorKind::DegenerateNorm, "feature of sample " + std::to_string(k) + " has norm <= 1e-12");
    }
    const std::size_t y = batch.labels[k];
    const std::size_t y_sim = sim.most_similar[y];
    const auto f_target = bank.feature(y);
    const auto f_similar = bank.feature(y_sim);
    const double weight = sim.s(y, y_sim);

    const double cos_target = dot(x, f_target) / (nx * norm2(f_target));
    const double cos_similar = dot(x, f_similar) / (nx * norm2(f_similar));
    out.value += 1.0 - cos_target + weight * cos_similar;

    cosine_gradient_wrt_first(x, f_target, g_target);
    cosine_gradient_wrt_first(x, f_similar, g_similar);
    auto g = out.grad.row(k);
    for (std::size_t i = 0; i < d; ++i) g[i] = -g_target[i] + weight * g_similar[i];
  }
  return out;
}

/// Class-center label generation loss (unnormalized sum):
///   Σ_k KL(softmax(z_k) ‖ softmax(L_{y_k}))
/// Gradient w.r.t. z_k: p_j · (log(p_j / q_j) − KL_k), with Q constant.
inline LossTerm clg_loss(const Batch& batch, const CenterBank& bank) {
  detail::check_batch_against_bank(batch, bank);
  const std::size_t m = batch.size();
  const std::size_t n = bank.num_classes();
  LossTerm out{0.0, DenseMatrix(m, n)};
  for (std::size_t k = 0; k < m; ++k) {
    const auto log_p = log_softmax(batch.logits.row(k));
    const auto log_q = detail::floored_log_soft_label(bank.logits(batch.labels[k]));
    std::vector<double> p(n), log_ratio(n);
    double kl = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      p[j] = std::exp(log_p[j]);
      log_ratio[j] = log_p[j] - log_q[j];
      kl += p[j] * log_ratio[j];
    }
    out.value += kl;
    auto g = out.grad.row(k);
    for (std::size_t j = 0; j < n; ++j) g[j] = p[j] * (log_ratio[j] - kl);
  }
  return out;
}

/// Mean softmax cross-entropy −(1/M) Σ_k log softmax(z_k)[y_k].
inline LossTerm ce_loss(const Batch& batch) {
  const std::size_t n = batch.logits.cols();
  batch.validate(n);
  const std::size_t m = batch.size();
  const double inv_m = 1.0 / static_cast<double>(m);
  LossTerm out{0.0, DenseMatrix(m, n)};
  for (std::size_t k = 0; k < m; ++k) {
    const auto log_p = log_softmax(batch.logits.row(k));
    out.value -= log_p[batch.labels[k]] * inv_m;
    auto g = out.grad.row(k);
    for (std::size_t j = 0; j < n; ++j) g[j] = std::exp(log_p[j]) * inv_m;
    g[batch.labels[k]] -= inv_m;
  }
  return out;
}

/// CE + λ₁·MCC + λ₂·CLG. A term whose weight is zero is skipped and reported
/// as exactly 0, so a zero-weight run is the plain cross-entropy baseline.
inline LossResult final_loss(const Batch& batch, const CenterBank& bank, const SimilarityMatrix& sim,
                             LossWeights weights) {
  if (!(weights.mcc >= 0.0) || !(weights.clg >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "loss weights must be nonnegative");
  }
  detail::check_batch_against_bank(batch, bank);
  LossTerm ce = ce_loss(batch);
  LossResult result{ce.value, 0.0, 0.0, 0.0, DenseMatrix(batch.size(), bank.feature_dim()), std::move(ce.grad)};

  if (weights.mcc > 0.0) {
    LossTerm mcc = mcc_loss(batch, bank, sim);
    result.mcc = mcc.value;
    auto dst = result.grad_features.data();
    auto src = mcc.grad.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = weights.mcc * src[i];
  }
  if (weights.clg > 0.0) {
    LossTerm clg = clg_loss(batch, bank);
    result.clg = clg.value;
    auto dst = result.grad_logits.data();
    auto src = clg.grad.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += weights.clg * src[i];
  }
  result.total = result.ce + weights.mcc * result.mcc + weights.clg * result.clg;
  return result;
}

}  // namespace ecc

#endif  // ECC_LOSS_HPP_

#ifndef ECC_LINALG_HPP_
#define ECC_LINALG_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ecc/error.hpp"

namespace ecc {

/// Zero-norm guard for cosine similarity.
inline constexpr double kNormEpsilon = 1e-12;
/// Floor applied to the reference distribution before taking logs in KL.
inline constexpr double kProbabilityFloor = 1e-12;
/// Tolerance for the probability-simplex precondition of kl_divergence.
inline constexpr double kSimplexTolerance = 1e-9;

inline bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

/// Dense 64-bit vector. Length >= 1 and all entries finite on construction.
class DenseVector {
 public:
  explicit DenseVector(std::vector<double> values) : values_(std::move(values)) { validate(); }
  DenseVector(std::initializer_list<double> values) : values_(values) { validate(); }

  static DenseVector zeros(std::size_t length) { return DenseVector(std::vector<double>(length, 0.0)); }

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  std::span<const double> span() const noexcept { return values_; }
  std::span<double> span() noexcept { return values_; }
  operator std::span<const double>() const noexcept { return values_; }

  const std::vector<double>& values() const noexcept { return values_; }

  bool operator==(const DenseVector&) const = default;

 private:
  void validate() const {
    if (values_.empty()) throw Error(ErrorKind::InvalidShape, "vector length must be >= 1");
    if (!all_finite(values_)) throw Error(ErrorKind::NonFinite, "vector contains NaN or Inf");
  }

  std::vector<double> values_;
};

/// Dense row-major 64-bit matrix. rows, cols >= 1 and all entries finite on
/// construction.
class DenseMatrix {
 public:
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (rows_ == 0 || cols_ == 0) throw Error(ErrorKind::InvalidShape, "matrix dimensions must be >= 1");
    if (values_.size() != rows_ * cols_) {
      throw Error(ErrorKind::ShapeMismatch, "matrix value count " + std::to_string(values_.size()) +
                                                " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
    }
    if (!all_finite(values_)) throw Error(ErrorKind::NonFinite, "matrix contains NaN or Inf");
  }

  DenseMatrix(std::size_t rows, std::size_t cols) : DenseMatrix(rows, cols, std::vector<double>(rows * cols, 0.0)) {}

  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> values;
    values.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw Error(ErrorKind::ShapeMismatch, "ragged matrix rows");
      values.insert(values.end(), row.begin(), row.end());
    }
    return DenseMatrix(r, c, std::move(values));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }

  std::span<const double> data() const noexcept { return values_; }
  std::span<double> data() noexcept { return values_; }

  bool same_shape(const DenseMatrix& other) const noexcept { return rows_ == other.rows_ && cols_ == other.cols_; }

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> values_;
};

inline void require_same_length(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::ShapeMismatch, std::string(what) + ": lengths " + std::to_string(a.size()) + " and " +
                                              std::to_string(b.size()));
  }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b, "dot");
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double norm2(std::span<const double> a) { return std::sqrt(std::inner_product(a.begin(), a.end(), a.begin(), 0.0)); }

inline double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b, "euclidean_distance");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

/// aᵀb / (‖a‖‖b‖), clamped to [-1, 1]. Throws DegenerateNorm when either norm
/// is at or below kNormEpsilon.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b, "cosine_similarity");
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na <= kNormEpsilon || nb <= kNormEpsilon) {
    throw Error(ErrorKind::DegenerateNorm, "cosine_similarity on a vector with norm <= 1e-12");
  }
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

/// Gradient of cos(x, f) with respect to x:
///   f / (‖x‖‖f‖) − cos(x, f) · x / ‖x‖²
/// Unclamped, so that it is the exact derivative of the unclamped ratio.
inline void cosine_gradient_wrt_first(std::span<const double> x, std::span<const double> f, std::span<double> out) {
  const double nx = norm2(x);
  const double nf = norm2(f);
  if (nx <= kNormEpsilon || nf <= kNormEpsilon) {
    throw Error(ErrorKind::DegenerateNorm, "cosine gradient on a vector with norm <= 1e-12");
  }
  const double c = dot(x, f) / (nx * nf);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f[i] / (nx * nf) - c * x[i] / (nx * nx);
}

/// Numerically stable log-softmax (max subtraction, log-sum-exp).
inline std::vector<double> log_softmax(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - m);
  const double lse = m + std::log(sum);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - lse;
  return out;
}

inline DenseVector softmax(std::span<const double> z) {
  if (z.empty()) throw Error(ErrorKind::InvalidShape, "softmax of an empty vector");
  if (!all_finite(z)) throw Error(ErrorKind::NonFinite, "softmax input contains NaN or Inf");
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> out(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - m);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return DenseVector(std::move(out));
}

inline bool on_simplex(std::span<const double> p, double tolerance = kSimplexTolerance) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= -tolerance)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tolerance;
}

/// KL(p ‖ q) = Σ p_n log(p_n / q_n) with 0·log(0/q) = 0. q is floored at
/// kProbabilityFloor before the log.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
  require_same_length(p, q, "kl_divergence");
  if (!on_simplex(p) || !on_simplex(q)) {
    throw Error(ErrorKind::SimplexViolation, "kl_divergence inputs must lie on the probability simplex");
  }
  double kl = 0.0;
  for (std::size_t n = 0; n < p.size(); ++n) {
    if (p[n] <= 0.0) continue;
    kl += p[n] * (std::log(p[n]) - std::log(std::max(q[n], kProbabilityFloor)));
  }
  return kl;
}

}  // namespace ecc

#endif  // ECC_LINALG_HPP_

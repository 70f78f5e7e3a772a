#ifndef ECC_METRICS_HPP_
#define ECC_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ecc/center_bank.hpp"
#include "ecc/error.hpp"
#include "ecc/linalg.hpp"
#include "ecc/loss.hpp"
#include "ecc/synthetic.hpp"

namespace ecc {

/// Compactness and separation of labelled features, measured on empirical
/// class centroids.
struct GeometryReport {
  double intra_class_variance = 0.0;
  double nearest_nontarget_margin = 0.0;
  std::vector<double> per_class_variance;
  std::vector<double> per_class_margin;
  std::vector<std::size_t> nearest_class;
};

inline GeometryReport geometry_report(const DenseMatrix& features, const std::vector<std::size_t>& labels,
                                      std::size_t num_classes) {
  if (features.rows() != labels.size()) throw Error(ErrorKind::ShapeMismatch, "features and labels disagree");
  if (num_classes < 2) throw Error(ErrorKind::InvalidArgument, "geometry_report needs >= 2 classes");
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::size_t y : labels) {
    if (y >= num_classes) throw Error(ErrorKind::IndexOutOfRange, "label " + std::to_string(y));
    ++counts[y];
  }
  for (std::size_t y = 0; y < num_classes; ++y) {
    if (counts[y] < 2) {
      throw Error(ErrorKind::EmptyClass, "class " + std::to_string(y) + " has " + std::to_string(counts[y]) +
                                             " samples, need >= 2");
    }
  }

  const DenseMatrix centroids = class_centroids(features, labels, num_classes);
  GeometryReport report;
  report.per_class_variance.assign(num_classes, 0.0);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const double dist = euclidean_distance(features.row(r), centroids.row(labels[r]));
    report.per_class_variance[labels[r]] += dist * dist;
  }
  for (std::size_t y = 0; y < num_classes; ++y) report.per_class_variance[y] /= static_cast<double>(counts[y]);

  report.nearest_class = nearest_other_centroid(centroids);
  report.per_class_margin.resize(num_classes);
  for (std::size_t y = 0; y < num_classes; ++y) {
    report.per_class_margin[y] = euclidean_distance(centroids.row(y), centroids.row(report.nearest_class[y]));
  }

  const auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  report.intra_class_variance = mean(report.per_class_variance);
  report.nearest_nontarget_margin = mean(report.per_class_margin);
  return report;
}

struct SoftLabelEntry {
  std::vector<double> soft_label;  // Q_y
  std::size_t most_similar = 0;
  double similar_confidence = 0.0;
  /// Mean of Q_y over classes other than y and most_similar[y]; 0 when N = 2.
  double other_confidence = 0.0;
};

struct SoftLabelReport {
  std::vector<SoftLabelEntry> classes;

  /// Fraction of classes whose most-similar class gets strictly more
  /// confidence than the average remaining nontarget class.
  double similar_dominance_rate() const {
    std::size_t hits = 0;
    for (const auto& c : classes) hits += c.similar_confidence > c.other_confidence;
    return static_cast<double>(hits) / static_cast<double>(classes.size());
  }
};

/// Soft label softmax(L_y) of every class, with the confidence it assigns to
/// the most similar class versus the remaining nontarget classes. Throws
/// UnseenClass listing classes whose counter is still 0.
inline SoftLabelReport soft_label_report(const CenterBank& bank, const SimilarityMatrix& sim) {
  const std::size_t n = bank.num_classes();
  if (sim.num_classes() != n) throw Error(ErrorKind::ShapeMismatch, "similarity matrix does not match the bank");
  std::string unseen;
  for (std::size_t y = 0; y < n; ++y) {
    if (bank.counter(y) == 0) unseen += (unseen.empty() ? "" : ",") + std::to_string(y);
  }
  if (!unseen.empty()) throw Error(ErrorKind::UnseenClass, "classes never updated: " + unseen);

  SoftLabelReport report;
  report.classes.reserve(n);
  for (std::size_t y = 0; y < n; ++y) {
    SoftLabelEntry entry;
    entry.soft_label = softmax(bank.logits(y)).values();
    entry.most_similar = sim.most_similar[y];
    entry.similar_confidence = entry.soft_label[entry.most_similar];
    double other = 0.0;
    std::size_t count = 0;
    for (std::size_t w = 0; w < n; ++w) {
      if (w == y || w == entry.most_similar) continue;
      other += entry.soft_label[w];
      ++count;
    }
    entry.other_confidence = count ? other / static_cast<double>(count) : 0.0;
    report.classes.push_back(std::move(entry));
  }
  return report;
}

struct PcaResult {
  DenseMatrix coordinates;  // M×k
  DenseMatrix components;   // k×D, unit rows
  std::vector<double> eigenvalues;  // sample covariance (M − 1 denominator)
};

struct PcaOptions {
  double tolerance = 1e-9;
  std::size_t max_iterations = 1000;
};

namespace detail {

inline std::vector<double> matmul_square(const std::vector<double>& a, const std::vector<double>& b, std::size_t d) {
  std::vector<double> c(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      const double aik = a[i * d + k];
      for (std::size_t j = 0; j < d; ++j) c[i * d + j] += aik * b[k * d + j];
    }
  }
  return c;
}

inline std::vector<double> matvec(const std::vector<double>& a, std::span<const double> v, std::size_t d) {
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) out[i] = dot(std::span<const double>(a.data() + i * d, d), v);
  return out;
}

}  // namespace detail

/// Projection onto the top-k principal components of the mean-centred rows.
///
/// Each component comes from power iteration on the deflated covariance. The
/// iteration operator is the fourth power of the (trace-normalised) deflated
/// covariance, which has the same eigenvectors and a wider spectral gap. Sign
/// convention: the largest-magnitude loading of every component is positive.
inline PcaResult pca_project(const DenseMatrix& features, std::size_t k = 2, PcaOptions options = {}) {
  const std::size_t m = features.rows();
  const std::size_t d = features.cols();
  if (m < 2 || d < 2) throw Error(ErrorKind::InvalidShape, "pca_project needs M >= 2 and D >= 2");
  if (k < 1 || k > d) throw Error(ErrorKind::InvalidArgument, "pca_project needs 1 <= k <= D");

  std::vector<double> mean(d, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    const auto x = features.row(r);
    for (std::size_t i = 0; i < d; ++i) mean[i] += x[i];
  }
  for (double& v : mean) v /= static_cast<double>(m);
  DenseMatrix centred(m, d);
  for (std::size_t r = 0; r < m; ++r) {
    const auto x = features.row(r);
    auto c = centred.row(r);
    for (std::size_t i = 0; i < d; ++i) c[i] = x[i] - mean[i];
  }

  std::vector<double> cov(d * d, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    const auto c = centred.row(r);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i; j < d; ++j) cov[i * d + j] += c[i] * c[j];
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      cov[i * d + j] /= static_cast<double>(m - 1);
      cov[j * d + i] = cov[i * d + j];
    }
  }
  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace += cov[i * d + i];

  std::mt19937_64 rng(0);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  std::vector<double> deflated = cov;
  DenseMatrix components(k, d);
  std::vector<double> eigenvalues;

  auto orthonormalize = [&](std::vector<double>& v, std::size_t found) {
    for (std::size_t c = 0; c < found; ++c) {
      const double proj = dot(v, components.row(c));
      for (std::size_t i = 0; i < d; ++i) v[i] -= proj * components(c, i);
    }
    const double nv = norm2(v);
    if (nv > 0.0) {
      for (double& x : v) x /= nv;
    }
    return nv;
  };

  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> v(d);
    for (double& x : v) x = uniform(rng);
    orthonormalize(v, c);

    const double scale = trace > 0.0 ? 1.0 / trace : 1.0;
    std::vector<double> op(d * d);
    for (std::size_t i = 0; i < d * d; ++i) op[i] = deflated[i] * scale;
    op = detail::matmul_square(op, op, d);
    op = detail::matmul_square(op, op, d);

    // Remaining spectrum numerically zero: any orthonormal direction will do.
    double remaining = 0.0;
    for (std::size_t i = 0; i < d; ++i) remaining += deflated[i * d + i];
    bool converged = trace <= 0.0 || remaining <= 1e-12 * trace;

    for (std::size_t it = 0; !converged && it < options.max_iterations; ++it) {
      auto next = detail::matvec(op, v, d);
      if (orthonormalize(next, c) <= 1e-300) {
        converged = true;
        break;
      }
      double change = 0.0;
      for (std::size_t i = 0; i < d; ++i) change = std::max(change, std::abs(next[i] - v[i]));
      v = std::move(next);
      if (change < options.tolerance) converged = true;
    }
    if (!converged) {
      throw Error(ErrorKind::ConvergenceFailure, "power iteration for component " + std::to_string(c) +
                                                     " did not converge in " +
                                                     std::to_string(options.max_iterations) + " iterations");
    }

    std::size_t largest = 0;
    for (std::size_t i = 1; i < d; ++i) {
      if (std::abs(v[i]) > std::abs(v[largest])) largest = i;
    }
    if (v[largest] < 0.0) {
      for (double& x : v) x = -x;
    }
    const double lambda = std::max(0.0, dot(v, detail::matvec(cov, v, d)));
    for (std::size_t i = 0; i < d; ++i) components(c, i) = v[i];
    eigenvalues.push_back(lambda);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) deflated[i * d + j] -= lambda * v[i] * v[j];
    }
  }

  DenseMatrix coords(m, k);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < k; ++c) coords(r, c) = dot(centred.row(r), components.row(c));
  }
  return PcaResult{std::move(coords), std::move(components), std::move(eigenvalues)};
}

}  // namespace ecc

#endif  // ECC_METRICS_HPP_

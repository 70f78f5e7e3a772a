#ifndef ECC_CENTER_BANK_HPP_
#define ECC_CENTER_BANK_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ecc/error.hpp"
#include "ecc/linalg.hpp"

namespace ecc {

/// Immutable copy of the center features at the end of an epoch.
class CenterSnapshot {
 public:
  CenterSnapshot(std::size_t epoch, DenseMatrix center_features)
      : epoch_(epoch), center_features_(std::move(center_features)) {}

  std::size_t epoch() const noexcept { return epoch_; }
  const DenseMatrix& center_features() const noexcept { return center_features_; }

 private:
  std::size_t epoch_;
  DenseMatrix center_features_;
};

struct CenterDrift {
  std::vector<double> per_class;
  double mean = 0.0;
};

/// Per-class running means of sample features (N×D) and logit vectors (N×N),
/// with one sample counter per class.
///
/// Row y of each table is the arithmetic mean of every vector submitted for
/// class y. The random initialization only survives for classes that have
/// never been updated, since the first update gives it weight zero.
class CenterBank {
 public:
  /// Uniform[-0.1, 0.1] initialization from a seeded mt19937_64.
  static CenterBank random(std::size_t num_classes, std::size_t feature_dim, std::uint64_t seed) {
    if (num_classes < 2) throw Error(ErrorKind::InvalidShape, "center bank needs at least 2 classes");
    if (feature_dim < 1) throw Error(ErrorKind::InvalidShape, "center bank needs feature_dim >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(-0.1, 0.1);
    std::vector<double> features(num_classes * feature_dim);
    for (double& v : features) v = uniform(rng);
    std::vector<double> logits(num_classes * num_classes);
    for (double& v : logits) v = uniform(rng);
    return CenterBank(DenseMatrix(num_classes, feature_dim, std::move(features)),
                      DenseMatrix(num_classes, num_classes, std::move(logits)),
                      std::vector<std::uint64_t>(num_classes, 0), seed);
  }

  /// Rebuilds a bank from serialized state. Snapshots are not restored.
  CenterBank(DenseMatrix center_features, DenseMatrix center_logits, std::vector<std::uint64_t> counters,
             std::uint64_t seed)
      : center_features_(std::move(center_features)),
        center_logits_(std::move(center_logits)),
        counters_(std::move(counters)),
        seed_(seed) {
    const std::size_t n = center_features_.rows();
    if (n < 2) throw Error(ErrorKind::InvalidShape, "center bank needs at least 2 classes");
    if (center_logits_.rows() != n || center_logits_.cols() != n || counters_.size() != n) {
      throw Error(ErrorKind::ShapeMismatch, "center bank tables disagree on the class count");
    }
  }

  std::size_t num_classes() const noexcept { return center_features_.rows(); }
  std::size_t feature_dim() const noexcept { return center_features_.cols(); }
  std::uint64_t seed() const noexcept { return seed_; }

  const DenseMatrix& center_features() const noexcept { return center_features_; }
  const DenseMatrix& center_logits() const noexcept { return center_logits_; }
  const std::vector<std::uint64_t>& counters() const noexcept { return counters_; }

  std::span<const double> feature(std::size_t y) const { return center_features_.row(y); }
  std::span<const double> logits(std::size_t y) const { return center_logits_.row(y); }
  std::uint64_t counter(std::size_t y) const { return counters_.at(y); }

  /// F_y ← (x + C_y·F_y) / (C_y + 1), L_y likewise, then C_y ← C_y + 1.
  void update(std::size_t y, std::span<const double> feature, std::span<const double> logits) {
    if (y >= num_classes()) {
      throw Error(ErrorKind::IndexOutOfRange,
                  "class " + std::to_string(y) + " >= num_classes " + std::to_string(num_classes()));
    }
    if (feature.size() != feature_dim()) throw Error(ErrorKind::ShapeMismatch, "feature length != feature_dim");
    if (logits.size() != num_classes()) throw Error(ErrorKind::ShapeMismatch, "logit length != num_classes");
    if (!all_finite(feature) || !all_finite(logits)) throw Error(ErrorKind::NonFinite, "center update input");

    const double count = static_cast<double>(counters_[y]);
    const double inv = 1.0 / (count + 1.0);
    auto f = center_features_.row(y);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = (feature[i] + count * f[i]) * inv;
    auto l = center_logits_.row(y);
    for (std::size_t i = 0; i < l.size(); ++i) l[i] = (logits[i] + count * l[i]) * inv;
    ++counters_[y];
  }

  /// Zeroes the counters; the stored means then act as a weight-zero init.
  void reset_counters() { std::fill(counters_.begin(), counters_.end(), 0); }

  /// Stores and returns a deep copy of the center features. Epochs must be
  /// strictly increasing.
  const CenterSnapshot& take_snapshot(std::size_t epoch) {
    if (!snapshots_.empty() && epoch <= snapshots_.back().epoch()) {
      throw Error(ErrorKind::NonMonotonicEpoch, "snapshot epoch " + std::to_string(epoch) +
                                                    " is not after stored epoch " +
                                                    std::to_string(snapshots_.back().epoch()));
    }
    snapshots_.emplace_back(epoch, center_features_);
    return snapshots_.back();
  }

  const std::vector<CenterSnapshot>& snapshots() const noexcept { return snapshots_; }

 private:
  DenseMatrix center_features_;
  DenseMatrix center_logits_;
  std::vector<std::uint64_t> counters_;
  std::uint64_t seed_;
  std::vector<CenterSnapshot> snapshots_;
};

inline CenterBank init_bank(std::size_t num_classes, std::size_t feature_dim, std::uint64_t seed) {
  return CenterBank::random(num_classes, feature_dim, seed);
}

/// Per-class Euclidean distance between the center rows of two snapshots.
inline CenterDrift center_drift(const CenterSnapshot& a, const CenterSnapshot& b) {
  const auto& fa = a.center_features();
  const auto& fb = b.center_features();
  if (!fa.same_shape(fb)) throw Error(ErrorKind::ShapeMismatch, "center_drift on snapshots of different shape");
  CenterDrift drift;
  drift.per_class.reserve(fa.rows());
  double total = 0.0;
  for (std::size_t y = 0; y < fa.rows(); ++y) {
    drift.per_class.push_back(euclidean_distance(fa.row(y), fb.row(y)));
    total += drift.per_class.back();
  }
  drift.mean = total / static_cast<double>(fa.rows());
  return drift;
}

}  // namespace ecc

#endif  // ECC_CENTER_BANK_HPP_

#ifndef ECC_SYNTHETIC_HPP_
#define ECC_SYNTHETIC_HPP_

#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ecc/error.hpp"
#include "ecc/linalg.hpp"

namespace ecc {

/// Gaussian "fine-grained" mixture: G superclusters, each split into c
/// subclasses that sit much closer to one another than to other
/// superclusters. Class index of subclass j in supercluster g is g·c + j.
struct SyntheticSpec {
  std::size_t num_superclusters = 4;
  std::size_t subclasses_per_cluster = 3;
  std::size_t input_dim = 16;
  std::size_t samples_per_class_train = 50;
  std::size_t samples_per_class_test = 50;
  double sigma_super = 10.0;
  double sigma_sub = 1.0;
  double sigma_noise = 0.3;
  std::uint64_t seed = 2024;

  std::size_t num_classes() const noexcept { return num_superclusters * subclasses_per_cluster; }

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidSpec, what); };
    if (num_superclusters < 1) fail("num_superclusters must be >= 1");
    if (subclasses_per_cluster < 1) fail("subclasses_per_cluster must be >= 1");
    if (num_classes() < 2) fail("num_superclusters * subclasses_per_cluster must be >= 2");
    if (input_dim < 1) fail("input_dim must be >= 1");
    if (samples_per_class_train < 1) fail("samples_per_class_train must be >= 1");
    if (samples_per_class_test < 1) fail("samples_per_class_test must be >= 1");
    if (!(sigma_noise > 0.0)) fail("sigma_noise must be > 0");
    if (!(sigma_sub > sigma_noise)) fail("sigma_sub must be > sigma_noise");
    if (!(sigma_super > sigma_sub)) fail("sigma_super must be > sigma_sub");
  }

  bool operator==(const SyntheticSpec&) const = default;
};

enum class Split { Train, Test };

inline const char* to_string(Split split) { return split == Split::Train ? "train" : "test"; }

struct Dataset {
  DenseMatrix inputs;
  std::vector<std::size_t> labels;
  Split split = Split::Train;
  SyntheticSpec spec;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t num_classes() const noexcept { return spec.num_classes(); }
  std::size_t input_dim() const noexcept { return inputs.cols(); }
};

struct DatasetPair {
  Dataset train;
  Dataset test;
};

/// Pure function of `spec`: superclusters ~ N(0, σ_super²I), subclass
/// centers = supercluster + N(0, σ_sub²I), samples = subclass center +
/// N(0, σ_noise²I). Train and test share the subclass centers; their noise
/// draws are disjoint. Rows are grouped by class.
inline DatasetPair generate(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> standard(0.0, 1.0);
  const std::size_t dim = spec.input_dim;
  const std::size_t n = spec.num_classes();

  std::vector<double> super_centers(spec.num_superclusters * dim);
  for (double& v : super_centers) v = spec.sigma_super * standard(rng);

  std::vector<double> class_centers(n * dim);
  for (std::size_t g = 0; g < spec.num_superclusters; ++g) {
    for (std::size_t j = 0; j < spec.subclasses_per_cluster; ++j) {
      const std::size_t y = g * spec.subclasses_per_cluster + j;
      for (std::size_t i = 0; i < dim; ++i) {
        class_centers[y * dim + i] = super_centers[g * dim + i] + spec.sigma_sub * standard(rng);
      }
    }
  }

  auto draw = [&](std::size_t per_class, Split split) {
    std::vector<double> values;
    values.reserve(n * per_class * dim);
    std::vector<std::size_t> labels;
    labels.reserve(n * per_class);
    for (std::size_t y = 0; y < n; ++y) {
      for (std::size_t s = 0; s < per_class; ++s) {
        for (std::size_t i = 0; i < dim; ++i) values.push_back(class_centers[y * dim + i] + spec.sigma_noise * standard(rng));
        labels.push_back(y);
      }
    }
    return Dataset{DenseMatrix(n * per_class, dim, std::move(values)), std::move(labels), split, spec};
  };

  Dataset train = draw(spec.samples_per_class_train, Split::Train);
  Dataset test = draw(spec.samples_per_class_test, Split::Test);
  return DatasetPair{std::move(train), std::move(test)};
}

/// Per-class mean of the rows of `points`. Throws EmptyClass if a class in
/// [0, num_classes) has no rows.
inline DenseMatrix class_centroids(const DenseMatrix& points, const std::vector<std::size_t>& labels,
                                   std::size_t num_classes) {
  if (points.rows() != labels.size()) throw Error(ErrorKind::ShapeMismatch, "points and labels disagree");
  DenseMatrix centroids(num_classes, points.cols());
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] >= num_classes) throw Error(ErrorKind::IndexOutOfRange, "label " + std::to_string(labels[r]));
    auto c = centroids.row(labels[r]);
    const auto p = points.row(r);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += p[i];
    ++counts[labels[r]];
  }
  for (std::size_t y = 0; y < num_classes; ++y) {
    if (counts[y] == 0) throw Error(ErrorKind::EmptyClass, "class " + std::to_string(y) + " has no samples");
    for (double& v : centroids.row(y)) v /= static_cast<double>(counts[y]);
  }
  return centroids;
}

/// For every class, the other class whose centroid is nearest (Euclidean).
/// Ties go to the lowest index.
inline std::vector<std::size_t> nearest_other_centroid(const DenseMatrix& centroids) {
  const std::size_t n = centroids.rows();
  std::vector<std::size_t> nearest(n);
  for (std::size_t y = 0; y < n; ++y) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t w = 0; w < n; ++w) {
      if (w == y) continue;
      const double d = euclidean_distance(centroids.row(y), centroids.row(w));
      if (d < best) {
        best = d;
        nearest[y] = w;
      }
    }
  }
  return nearest;
}

/// Ground-truth analogue of the most-similar-class index: nearest other
/// class by empirical input-space centroid.
inline std::vector<std::size_t> class_affinity_oracle(const Dataset& train) {
  if (train.num_classes() < 2) throw Error(ErrorKind::InvalidSpec, "affinity oracle needs >= 2 classes");
  return nearest_other_centroid(class_centroids(train.inputs, train.labels, train.num_classes()));
}

}  // namespace ecc

#endif  // ECC_SYNTHETIC_HPP_

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "ecc/synthetic.hpp"
#include "support.hpp"

namespace {

using ecc::ErrorKind;
using ecc::SyntheticSpec;
using ecc::testing::kind_of;

std::size_t supercluster_of(const SyntheticSpec& spec, std::size_t y) { return y / spec.subclasses_per_cluster; }

TEST(Generate, Deterministic) {
  const SyntheticSpec spec;
  const auto a = ecc::generate(spec);
  const auto b = ecc::generate(spec);
  EXPECT_TRUE(std::ranges::equal(a.train.inputs.data(), b.train.inputs.data()));
  EXPECT_TRUE(std::ranges::equal(a.test.inputs.data(), b.test.inputs.data()));
  EXPECT_EQ(a.train.labels, b.train.labels);
  SyntheticSpec other = spec;
  other.seed = spec.seed + 1;
  EXPECT_FALSE(std::ranges::equal(a.train.inputs.data(), ecc::generate(other).train.inputs.data()));
}

TEST(Generate, ClassBalanceAndShape) {
  SyntheticSpec spec;
  spec.samples_per_class_train = 7;
  spec.samples_per_class_test = 3;
  const auto data = ecc::generate(spec);
  EXPECT_EQ(data.train.size(), 12u * 7);
  EXPECT_EQ(data.test.size(), 12u * 3);
  EXPECT_EQ(data.train.input_dim(), 16u);
  EXPECT_EQ(data.train.split, ecc::Split::Train);
  EXPECT_EQ(data.test.split, ecc::Split::Test);
  for (std::size_t y = 0; y < 12; ++y) {
    EXPECT_EQ(std::ranges::count(data.train.labels, y), 7);
    EXPECT_EQ(std::ranges::count(data.test.labels, y), 3);
  }
}

TEST(Generate, NoiseFreeSamplesSitOnTheirCenter) {
  SyntheticSpec spec;
  spec.sigma_noise = 1e-300;
  const auto data = ecc::generate(spec);
  for (const auto* set : {&data.train, &data.test}) {
    for (std::size_t r = 0; r < set->size(); ++r) {
      const std::size_t first = static_cast<std::size_t>(std::ranges::find(data.train.labels, set->labels[r]) -
                                                         data.train.labels.begin());
      EXPECT_TRUE(std::ranges::equal(set->inputs.row(r), data.train.inputs.row(first))) << "row " << r;
    }
  }
}

TEST(Generate, NearestClassSharesSupercluster) {
  const SyntheticSpec spec;
  const auto data = ecc::generate(spec);
  const auto centroids = ecc::class_centroids(data.train.inputs, data.train.labels, spec.num_classes());
  std::size_t same = 0;
  for (std::size_t y = 0; y < spec.num_classes(); ++y) {
    std::size_t best = y;
    double best_d = INFINITY;
    for (std::size_t w = 0; w < spec.num_classes(); ++w) {
      if (w == y) continue;
      double ss = 0.0;
      for (std::size_t i = 0; i < spec.input_dim; ++i) ss += std::pow(centroids(y, i) - centroids(w, i), 2);
      if (ss < best_d) best_d = ss, best = w;
    }
    same += supercluster_of(spec, best) == supercluster_of(spec, y);
  }
  EXPECT_GE(static_cast<double>(same) / spec.num_classes(), 0.9);
}

TEST(Generate, WithinSuperclusterCloserThanAcross) {
  const SyntheticSpec spec;
  const auto data = ecc::generate(spec);
  const auto c = ecc::class_centroids(data.train.inputs, data.train.labels, spec.num_classes());
  double within = 0, across = 0;
  int nw = 0, na = 0;
  for (std::size_t y = 0; y < spec.num_classes(); ++y) {
    for (std::size_t w = y + 1; w < spec.num_classes(); ++w) {
      const double d = ecc::euclidean_distance(c.row(y), c.row(w));
      if (supercluster_of(spec, y) == supercluster_of(spec, w)) {
        within += d, ++nw;
      } else {
        across += d, ++na;
      }
    }
  }
  EXPECT_LT(within / nw, across / na);
}

TEST(Spec, Validation) {
  auto with = [](auto mutate) {
    SyntheticSpec s;
    mutate(s);
    return kind_of([&] { s.validate(); });
  };
  EXPECT_EQ(with([](SyntheticSpec& s) { s.sigma_sub = 20; }), ErrorKind::InvalidSpec);
  EXPECT_EQ(with([](SyntheticSpec& s) { s.sigma_noise = 2; }), ErrorKind::InvalidSpec);
  EXPECT_EQ(with([](SyntheticSpec& s) { s.sigma_noise = 0; }), ErrorKind::InvalidSpec);
  EXPECT_EQ(with([](SyntheticSpec& s) { s.samples_per_class_train = 0; }), ErrorKind::InvalidSpec);
  EXPECT_EQ(with([](SyntheticSpec& s) { s.input_dim = 0; }), ErrorKind::InvalidSpec);
  EXPECT_EQ(with([](SyntheticSpec& s) { s.num_superclusters = 1, s.subclasses_per_cluster = 1; }),
            ErrorKind::InvalidSpec);
}

TEST(AffinityOracle, TwoClassesPointAtEachOther) {
  SyntheticSpec spec;
  spec.num_superclusters = 2;
  spec.subclasses_per_cluster = 1;
  const auto oracle = ecc::class_affinity_oracle(ecc::generate(spec).train);
  EXPECT_EQ(oracle, (std::vector<std::size_t>{1, 0}));
}

TEST(AffinityOracle, NoiseFreeMatchesSubclassCenters) {
  SyntheticSpec spec;
  spec.sigma_noise = 1e-300;
  const auto data = ecc::generate(spec);
  const std::size_t per = spec.samples_per_class_train;
  ecc::DenseMatrix centers(spec.num_classes(), spec.input_dim);
  for (std::size_t y = 0; y < spec.num_classes(); ++y) {
    std::ranges::copy(data.train.inputs.row(y * per), centers.row(y).begin());
  }
  EXPECT_EQ(ecc::class_affinity_oracle(data.train), ecc::nearest_other_centroid(centers));
}

TEST(AffinityOracle, NeverSelf) {
  const auto oracle = ecc::class_affinity_oracle(ecc::generate(SyntheticSpec{}).train);
  for (std::size_t y = 0; y < oracle.size(); ++y) EXPECT_NE(oracle[y], y);
}

TEST(ClassCentroids, EmptyClass) {
  const auto points = ecc::DenseMatrix::from_rows({{1, 2}, {3, 4}});
  EXPECT_EQ(kind_of([&] { ecc::class_centroids(points, {0, 0}, 2); }), ErrorKind::EmptyClass);
  const auto c = ecc::class_centroids(points, {0, 0}, 1);
  EXPECT_EQ(c(0, 0), 2.0);
  EXPECT_EQ(c(0, 1), 3.0);
}

}  // namespace

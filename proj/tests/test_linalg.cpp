#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ecc/linalg.hpp"
#include "support.hpp"

namespace {

using ecc::DenseMatrix;
using ecc::DenseVector;
using ecc::ErrorKind;

using ecc::testing::kind_of;

TEST(DenseVector, RejectsEmptyAndNonFinite) {
  EXPECT_EQ(kind_of([] { DenseVector v(std::vector<double>{}); }), ErrorKind::InvalidShape);
  EXPECT_EQ(kind_of([] { DenseVector v{1.0, NAN}; }), ErrorKind::NonFinite);
  EXPECT_EQ(kind_of([] { DenseVector v{INFINITY}; }), ErrorKind::NonFinite);
}

TEST(DenseMatrix, RowMajorLayout) {
  const auto m = DenseMatrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m(1, 0), 4.0);
  EXPECT_EQ(m.row(1)[2], 6.0);
  EXPECT_EQ(m.data()[3], 4.0);
}

TEST(Cosine, Examples) {
  EXPECT_DOUBLE_EQ(ecc::cosine_similarity(DenseVector{1, 0}, DenseVector{1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(ecc::cosine_similarity(DenseVector{1, 0}, DenseVector{0, 1}), 0.0);
  EXPECT_DOUBLE_EQ(ecc::cosine_similarity(DenseVector{1, 2, 3}, DenseVector{2, 4, 6}), 1.0);
  EXPECT_DOUBLE_EQ(ecc::cosine_similarity(DenseVector{1, 0}, DenseVector{-3, 0}), -1.0);
  EXPECT_NEAR(ecc::cosine_similarity(DenseVector{1, 0}, DenseVector{1, 1}), 0.707107, 1e-6);
}

TEST(Cosine, ZeroNormIsDegenerate) {
  EXPECT_EQ(kind_of([] { ecc::cosine_similarity(DenseVector{0, 0}, DenseVector{1, 0}); }), ErrorKind::DegenerateNorm);
  EXPECT_EQ(kind_of([] { ecc::cosine_similarity(DenseVector{1, 0}, DenseVector{1e-13, 0}); }),
            ErrorKind::DegenerateNorm);
}

TEST(Cosine, LengthMismatch) {
  EXPECT_EQ(kind_of([] { ecc::cosine_similarity(DenseVector{1, 0}, DenseVector{1, 0, 0}); }), ErrorKind::ShapeMismatch);
}

TEST(Cosine, BoundedSymmetricScaleInvariant) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 1 + t % 20;
    const auto a = ecc::testing::random_vector(rng, n);
    const auto b = ecc::testing::random_vector(rng, n);
    const double c = ecc::cosine_similarity(a, b);
    EXPECT_LE(std::abs(c), 1.0);
    EXPECT_EQ(c, ecc::cosine_similarity(b, a));
    auto a2 = a;
    const double s = scale(rng);
    for (double& v : a2) v *= s;
    EXPECT_NEAR(ecc::cosine_similarity(a2, b), c, 1e-12);
  }
}

TEST(Cosine, GradientMatchesDifferences) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + t % 8;
    auto x = ecc::testing::random_vector(rng, n);
    const auto f = ecc::testing::random_vector(rng, n);
    std::vector<double> g(n);
    ecc::cosine_gradient_wrt_first(x, f, g);
    for (std::size_t i = 0; i < n; ++i) {
      const double h = 1e-6, keep = x[i];
      x[i] = keep + h;
      const double up = ecc::cosine_similarity(x, f);
      x[i] = keep - h;
      const double down = ecc::cosine_similarity(x, f);
      x[i] = keep;
      EXPECT_NEAR(g[i], (up - down) / (2 * h), 1e-7);
    }
  }
}

TEST(Softmax, Examples) {
  const auto p = ecc::softmax(DenseVector{1, 2, 3});
  EXPECT_NEAR(p[0], 0.090031, 1e-6);
  EXPECT_NEAR(p[1], 0.244728, 1e-6);
  EXPECT_NEAR(p[2], 0.665241, 1e-6);
  const auto u = ecc::softmax(DenseVector{0, 0, 0});
  for (double v : u.values()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Softmax, LargeLogitsStayFinite) {
  const auto p = ecc::softmax(DenseVector{1000, 1001, 1002});
  EXPECT_NEAR(p[2], 0.665241, 1e-6);
  const auto q = ecc::softmax(DenseVector{1000, 0});
  EXPECT_TRUE(std::isfinite(q[1]));
  EXPECT_NEAR(q[0], 1.0, 1e-15);
  EXPECT_NEAR(q[1], 0.0, 1e-15);
}

TEST(Softmax, SimplexAndShiftInvariance) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 1 + t % 30;
    auto z = ecc::testing::random_vector(rng, n, -50.0, 50.0);
    const auto p = ecc::softmax(z);
    EXPECT_TRUE(ecc::on_simplex(p));
    for (double& v : z) v += 17.25;
    const auto q = ecc::softmax(z);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(p[i], q[i], 1e-12);
  }
}

TEST(KlDivergence, Examples) {
  EXPECT_DOUBLE_EQ(ecc::kl_divergence(DenseVector{0.5, 0.5}, DenseVector{0.5, 0.5}), 0.0);
  EXPECT_NEAR(ecc::kl_divergence(DenseVector{1, 0}, DenseVector{0.5, 0.5}), std::numbers::ln2, 1e-12);
  EXPECT_NEAR(ecc::kl_divergence(DenseVector{0.5, 0.5}, DenseVector{0.25, 0.75}), 0.143841, 1e-6);
}

TEST(KlDivergence, OffSimplexRejected) {
  EXPECT_EQ(kind_of([] { ecc::kl_divergence(DenseVector{0.6, 0.6}, DenseVector{0.5, 0.5}); }),
            ErrorKind::SimplexViolation);
  EXPECT_EQ(kind_of([] { ecc::kl_divergence(DenseVector{1.1, -0.1}, DenseVector{0.5, 0.5}); }),
            ErrorKind::SimplexViolation);
}

TEST(KlDivergence, ZeroTargetMassStaysFinite) {
  const double kl = ecc::kl_divergence(DenseVector{0.5, 0.5}, DenseVector{1, 0});
  EXPECT_TRUE(std::isfinite(kl));
  EXPECT_GT(kl, 10.0);
}

TEST(KlDivergence, NonNegativeAndZeroOnlyOnEquality) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 2 + t % 10;
    const auto p = ecc::softmax(ecc::testing::random_vector(rng, n, -4, 4));
    const auto q = ecc::softmax(ecc::testing::random_vector(rng, n, -4, 4));
    EXPECT_GE(ecc::kl_divergence(p, q), 0.0);
    EXPECT_NEAR(ecc::kl_divergence(p, p), 0.0, 1e-15);
  }
}

}  // namespace

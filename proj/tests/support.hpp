#ifndef ECC_TESTS_SUPPORT_HPP_
#define ECC_TESTS_SUPPORT_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "ecc/center_bank.hpp"
#include "ecc/error.hpp"
#include "ecc/linalg.hpp"

namespace ecc::testing {

/// Kind of the ecc::Error thrown by f; records a failure if none is thrown.
template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no ecc::Error thrown";
  return ErrorKind::Io;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

inline DenseMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double lo = -1.0,
                                 double hi = 1.0) {
  return DenseMatrix(rows, cols, random_vector(rng, rows * cols, lo, hi));
}

/// Bank with every class updated `per_class` times from random draws.
inline CenterBank random_trained_bank(std::mt19937_64& rng, std::size_t n, std::size_t d, std::size_t per_class = 3) {
  CenterBank bank = CenterBank::random(n, d, rng());
  for (std::size_t rep = 0; rep < per_class; ++rep) {
    for (std::size_t y = 0; y < n; ++y) {
      const auto f = random_vector(rng, d);
      const auto z = random_vector(rng, n, -3.0, 3.0);
      bank.update(y, f, z);
    }
  }
  return bank;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("ecc_tests_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace ecc::testing

#endif  // ECC_TESTS_SUPPORT_HPP_

#ifndef ECC_PARALLEL_HPP_
#define ECC_PARALLEL_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace ecc {

/// Thread cap from ECC_LAB_THREADS; 1 when unset or unparsable.
inline std::size_t threads_from_env() {
  const char* raw = std::getenv("ECC_LAB_THREADS");
  if (raw == nullptr) return 1;
  try {
    const long v = std::stol(raw);
    return v >= 1 ? static_cast<std::size_t>(v) : 1;
  } catch (...) {
    return 1;
  }
}

/// Runs fn(i) for i in [0, count) over at most `threads` workers using a
/// fixed contiguous partition. fn must only write state owned by index i.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(count, 1));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> workers;
  workers.reserve(threads);
  const std::size_t chunk = (count + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([&fn, begin, end] {
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
}

}  // namespace ecc

#endif  // ECC_PARALLEL_HPP_

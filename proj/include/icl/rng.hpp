#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace icl {

// Deterministic RNG for sampling and shuffling. mt19937_64 output is fixed by
// the standard, and the bounded draw below is hand-rolled rejection sampling,
// so equal seeds give equal draws on every platform and standard library.
// std::uniform_int_distribution / std::shuffle are deliberately avoided: their
// results may change between standard library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform draw in [0, n). n must be > 0.
  std::uint64_t bounded(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Fisher-Yates. With take < v.size() only the first `take` slots are
  // finalized; callers truncate to get a uniform sample without replacement.
  template <typename T>
  void partial_shuffle(std::vector<T>& v, std::size_t take) {
    const std::size_t n = v.size();
    if (n == 0) return;
    if (take > n) take = n;
    for (std::size_t i = 0; i < take && i + 1 < n; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(bounded(n - i));
      using std::swap;
      swap(v[i], v[j]);
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    partial_shuffle(v, v.size());
  }

  // First n elements of a seeded permutation of v.
  template <typename T>
  std::vector<T> sample(std::vector<T> v, std::size_t n) {
    partial_shuffle(v, n);
    v.resize(n);
    return v;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace icl

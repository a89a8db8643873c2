#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace scmkit {

// Deterministic PRNG (splitmix64) with explicit sampling helpers.
// std::uniform_*_distribution is implementation-defined, so all bounded
// sampling is spelled out here to keep generated pools reproducible
// across compilers and platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  static uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 0x632be59bd9b4e019ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Independent child stream; advancing the child never touches the parent.
  Rng fork(uint64_t salt) { return Rng(mix(next_u64(), salt)); }

  // Uniform integer in [lo, hi], inclusive. Unbiased via rejection.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    if (lo > hi) throw std::invalid_argument("uniform_int: empty range");
    uint64_t span = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
    if (span == 0) return static_cast<int64_t>(next_u64());  // full 64-bit range
    uint64_t reject_above = UINT64_MAX - (UINT64_MAX % span + 1) % span;
    uint64_t x;
    do {
      x = next_u64();
    } while (x > reject_above);
    return lo + static_cast<int64_t>(x % span);
  }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform_real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform_real() < p; }

  template <class T>
  const T& pick(const std::vector<T>& v) {
    if (v.empty()) throw std::invalid_argument("pick: empty vector");
    return v[static_cast<size_t>(uniform_int(0, static_cast<int64_t>(v.size()) - 1))];
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices from [0, n), in selection order.
  std::vector<size_t> sample_indices(size_t n, size_t k) {
    std::vector<size_t> all(n);
    for (size_t i = 0; i < n; ++i) all[i] = i;
    shuffle(all);
    all.resize(k);
    return all;
  }

 private:
  uint64_t state_;
};

}  // namespace scmkit

#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "copycat/common.hpp"

namespace copycat {

// Deterministic pseudo-randomness for every stochastic operation in the project.
//
// std::mt19937 is portable but the std distributions are not (their output is
// implementation-defined), so checkpoint hashes would silently change across
// standard libraries. We use xoshiro256++ seeded through splitmix64 and spell
// out the uniform/normal/shuffle transforms ourselves.

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), unbiased (rejection sampling).
  uint64_t below(uint64_t n) {
    if (n == 0) throw ValidationError("Rng::below: n must be positive");
    const uint64_t threshold = -n % n;  // 2^64 mod n
    for (;;) {
      const uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  int uniform_int(int lo, int hi_inclusive) {
    return lo + int(below(uint64_t(hi_inclusive - lo) + 1));
  }

  // Standard normal via Box-Muller; second deviate cached.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    cached_ = radius * std::sin(angle);
    have_cached_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Fisher-Yates; std::shuffle is implementation-defined, this is not.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) {
      using std::swap;
      swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t state_[4];
  double cached_ = 0.0;
  bool have_cached_ = false;
};

// Named substream derivation: every pipeline stage draws its own child seed
// from (root seed, stage name), so stages are independently reproducible.
inline uint64_t derive_seed(uint64_t root, std::string_view stage) {
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (const char c : stage) {
    h ^= uint64_t(uint8_t(c));
    h *= 0x100000001b3ULL;
  }
  uint64_t sm = root ^ h;
  return splitmix64(sm);
}

}  // namespace copycat

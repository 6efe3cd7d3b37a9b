// SPDX-License-Identifier: Apache-2.0
//
// Counter-based random streams (Philox4x32-10). Streams are splittable by
// integer label, so batches, channels and rollouts get independent,
// reproducible randomness regardless of evaluation order or thread count.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace mnnca {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace detail

class CounterRng {
 public:
  CounterRng() : CounterRng(0) {}
  explicit CounterRng(std::uint64_t seed) {
    const std::uint64_t k = detail::splitmix64(seed);
    key_ = {std::uint32_t(k), std::uint32_t(k >> 32)};
  }

  // Independent stream derived from this one's identity; does not disturb
  // this stream's position.
  CounterRng split(std::uint64_t label) const {
    CounterRng out;
    const std::uint64_t mixed = detail::splitmix64(
        (std::uint64_t(key_[1]) << 32 | key_[0]) ^ detail::splitmix64(label));
    out.key_ = {std::uint32_t(mixed), std::uint32_t(mixed >> 32)};
    return out;
  }

  std::uint32_t next_u32() {
    if (buf_pos_ == 4) {
      buf_ = block(counter_++, key_);
      buf_pos_ = 0;
    }
    return buf_[buf_pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return lo | (hi << 32);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [lo, hi], inclusive, bias-free by rejection.
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
    const std::uint64_t range = hi - lo + 1;
    if (range == 0) return next_u64();  // full 64-bit range
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return lo + v % range;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Standard normal via Box-Muller; one draw consumes two uniforms.
  double normal() {
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

 private:
  static std::array<std::uint32_t, 4> block(std::uint64_t ctr,
                                            std::array<std::uint32_t, 2> key) {
    std::array<std::uint32_t, 4> x = {std::uint32_t(ctr),
                                      std::uint32_t(ctr >> 32), 0u, 0u};
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = 0xD2511F53ull * x[0];
      const std::uint64_t p1 = 0xCD9E8D57ull * x[2];
      x = {std::uint32_t(p1 >> 32) ^ x[1] ^ key[0], std::uint32_t(p1),
           std::uint32_t(p0 >> 32) ^ x[3] ^ key[1], std::uint32_t(p0)};
      key[0] += 0x9E3779B9u;
      key[1] += 0xBB67AE85u;
    }
    return x;
  }

  std::array<std::uint32_t, 2> key_{};
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int buf_pos_ = 4;
};

}  // namespace mnnca

#pragma once

#include <cmath>
#include <cstdint>

namespace nkc {

// xoshiro256++ with SplitMix64-based stream splitting.
//
// Stream k of seed s takes its 256-bit state from positions 4k..4k+3 of the
// SplitMix64 output sequence whose initial state is s.  Distinct stream
// indices read disjoint windows of that sequence, giving statistically
// independent streams, and identical (seed, stream_index) pairs reproduce
// identical draw sequences on every platform.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}

  RngStream(std::uint64_t seed, std::uint64_t stream_index)
      : seed_(seed), stream_(stream_index) {
    std::uint64_t sm = seed + stream_index * 4u * kGolden;
    for (auto& word : state_) {
      sm += kGolden;
      std::uint64_t z = sm;
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
      z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
      word = z ^ (z >> 31);
    }
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = kGolden;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on the open interval (0,1); exact endpoints are rejected.
  double uniform_open01() {
    for (;;) {
      double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
      if (u != 0.0) return u;
    }
  }

  // Inverse-CDF exponential draw, -ln(U)/rate with U in (0,1).
  double exponential(double rate) { return -std::log(uniform_open01()) / rate; }

  // Unbiased integer in [0, n), n >= 1.
  std::uint64_t uniform_below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t x = next_u64();
      if (x >= threshold) return x % n;
    }
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_index() const { return stream_; }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
  std::uint64_t seed_;
  std::uint64_t stream_;
};

}  // namespace nkc

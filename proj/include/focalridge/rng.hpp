#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace focalridge {

// Philox4x32-10: a counter-based keyed bijection. The same (counter, key)
// pair maps to the same 128-bit block on every platform and under every
// thread schedule, which is what makes parallel simulation bitwise
// reproducible.
namespace philox {

inline constexpr std::uint32_t kMult0 = 0xD2511F53u;
inline constexpr std::uint32_t kMult1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter,
                                          std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    const std::uint64_t product0 = std::uint64_t{kMult0} * counter[0];
    const std::uint64_t product1 = std::uint64_t{kMult1} * counter[2];
    counter = {static_cast<std::uint32_t>(product1 >> 32) ^ counter[1] ^ key[0],
               static_cast<std::uint32_t>(product1),
               static_cast<std::uint32_t>(product0 >> 32) ^ counter[3] ^ key[1],
               static_cast<std::uint32_t>(product0)};
  }
  return counter;
}

}  // namespace philox

// A deterministic stream of draws addressed by (seed, stream): the seed keys
// the bijection, the stream id fills the counter's high 64 bits, and a block
// index fills the low 64 bits. Distinct streams can never overlap, so
// per-replication substreams may be consumed in any order or in parallel.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  std::uint32_t next_u32() {
    if (word_ == 4) {
      block_ = philox::block({static_cast<std::uint32_t>(index_),
                              static_cast<std::uint32_t>(index_ >> 32),
                              static_cast<std::uint32_t>(stream_),
                              static_cast<std::uint32_t>(stream_ >> 32)},
                             key_);
      ++index_;
      word_ = 0;
    }
    return block_[static_cast<std::size_t>(word_++)];
  }

  std::uint64_t next_u64() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double bernoulli(double prob) { return uniform() < prob ? 1.0 : 0.0; }

  // Standard normal via Box-Muller; consumes exactly two uniforms per pair
  // of draws (the second draw of each pair is cached).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // Shift into (0, 1] so the logarithm is finite.
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_ = 0;
  std::uint64_t index_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int word_ = 4;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Fisher-Yates shuffle driven by a CounterRng; deterministic given the
// generator's (seed, stream).
template <typename T>
void shuffle(std::vector<T>& items, CounterRng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    // uniform() < 1 guarantees j < i.
    const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace focalridge

#pragma once

#include <cstdint>
#include <random>

namespace deptree {

namespace detail {

/// SplitMix64 step; used to derive well-separated engine seeds from
/// (user seed, replication index) pairs.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Deterministic random stream. One independent substream per replication:
/// substream(seed, i) and substream(seed, j) are decorrelated for i != j.
/// Sampling goes through uniform01() only, so sequences are bit-identical
/// across platforms (std::<distribution> classes are not portable).
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t substream) {
    std::uint64_t s = seed ^ (0x632be59bd9b4e019ULL * (substream + 1));
    engine_.seed(detail::splitmix64(s));
  }

  /// Uniform draw in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace deptree

#pragma once

#include <array>
#include <cstdint>

namespace voltctl {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123). Output
/// block k of stream s under seed z is philox(key = z, counter = (k, s)), so any
/// implementation of the same cipher reproduces the sequence. Transforms to
/// uniform and normal variates are spelled out below for the same reason.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next();
  /// 53-bit uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi] (modulo reduction; bias below 2^-50 for small ranges).
  int uniform_int(int lo, int hi);
  /// Standard normal by the Box-Muller transform.
  double normal();

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> out_{};
  int used_ = 4;  // 64-bit words are taken in pairs; 4 means the block is spent
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// One raw Philox4x32-10 block, counter words (lo, hi) little-endian. Exposed
/// for known-answer tests.
std::array<std::uint32_t, 4> philox_block(std::uint64_t seed, std::uint64_t counter_lo,
                                          std::uint64_t counter_hi);

/// Stream identifiers, so each random effect draws from its own sequence.
enum RngStream : std::uint64_t {
  kStreamNoise = 1,
  kStreamCommDelay = 2,
  kStreamModelError = 3,
  kStreamProfile = 4,
  kStreamNetwork = 5,
};

}  // namespace voltctl

#pragma once

#include <array>
#include <cstdint>

namespace atlas {

/// Mixes two 64-bit values into one (splitmix64 finalizer over a combine).
/// Used everywhere a sub-stream seed is derived from a master seed, so that
/// derived streams are stable across runs and independent of scheduling.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// Counter-based random stream (Philox4x32-10).
///
/// Each instance is an independent stream identified by a 64-bit key.
/// Sub-streams are derived with `derive`, never by sharing state, so the
/// values produced by one stream do not depend on how much another stream
/// has consumed.
class Rng {
 public:
  explicit Rng(std::uint64_t key);

  /// Independent stream keyed by (this stream's key, a, b).
  Rng derive(std::uint64_t a, std::uint64_t b = 0) const;

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();

  /// Uniform integer in [0, n), n > 0, rejection-sampled (unbiased).
  std::uint64_t uniform_u64(std::uint64_t n);

  /// Standard normal via Box-Muller (pairs cached).
  double normal();

  std::uint64_t key() const { return key_; }

 private:
  void fill_block();

  std::uint64_t key_ = 0;
  std::array<std::uint32_t, 4> counter_{};
  std::array<std::uint32_t, 4> block_{};
  int block_pos_ = 4;  // forces fill on first use
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace atlas
